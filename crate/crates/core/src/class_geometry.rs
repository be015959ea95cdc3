//! Class-compositions and the norm / angle / projection summaries of an
//! explanation.

use crate::composition::Composition;
use crate::error::{Error, Result};

/// Unit-norm composition pointing straight towards class `k` and uniformly
/// away from every other class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassComposition {
    pub class_index: usize,
    pub value: Composition,
}

/// Off-class part `p` of a class-composition on `D` parts.
fn off_class_part(classes: usize) -> f64 {
    let d = classes as f64;
    let a = (-(d / (d - 1.0)).sqrt()).exp();
    a / (1.0 + (d - 1.0) * a)
}

pub fn class_composition(k: usize, classes: usize) -> Result<ClassComposition> {
    if classes < 2 {
        return Err(Error::DimensionTooSmall(classes));
    }
    if k >= classes {
        return Err(Error::IndexOutOfRange { index: k, classes });
    }
    let p = off_class_part(classes);
    let mut parts = vec![p; classes];
    parts[k] = 1.0 - (classes as f64 - 1.0) * p;
    Ok(ClassComposition {
        class_index: k,
        value: Composition::closure(&parts)?,
    })
}

pub fn class_compositions(classes: usize) -> Result<Vec<ClassComposition>> {
    (0..classes).map(|k| class_composition(k, classes)).collect()
}

/// Signed length of the projection of `x` on the direction of `c`.
pub fn project(x: &Composition, c: &ClassComposition) -> Result<f64> {
    x.inner(&c.value)
}

pub fn cosine(x: &Composition, y: &Composition) -> Result<f64> {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroNormOperand);
    }
    Ok((x.inner(y)? / (nx * ny)).clamp(-1.0, 1.0))
}

/// Angle between two distinct class-compositions, in radians.
pub fn angle_between_class_compositions(classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::DimensionTooSmall(classes));
    }
    let a = class_composition(0, classes)?;
    let b = class_composition(1, classes)?;
    Ok(cosine(&a.value, &b.value)?.acos())
}
