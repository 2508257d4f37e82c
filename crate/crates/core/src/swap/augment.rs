use crate::error::{Error, Result};
use crate::image::{bicubic_resample, rotate, ImageBuffer};

/// One augmented reference and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RefVariant {
    pub ref_index: usize,
    pub scale: f64,
    pub rotation: f64,
    pub image: ImageBuffer,
}

fn is_identity(scale: f64, rotation: f64) -> bool {
    scale == 1.0 && rotation.rem_euclid(360.0) == 0.0
}

/// Every reference followed by each of its (scale, rotation) variants.
/// The unmodified original always comes first and is never duplicated.
/// Scaling is bicubic; rotation is counter-clockwise about the center.
pub fn augment_references_tagged(
    refs: &[ImageBuffer],
    scales: &[f64],
    rotations: &[f64],
) -> Result<Vec<RefVariant>> {
    if refs.is_empty() {
        return Err(Error::Empty("reference list"));
    }
    if let Some(&s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidFactor(s));
    }
    let mut out = Vec::new();
    for (ref_index, r) in refs.iter().enumerate() {
        out.push(RefVariant {
            ref_index,
            scale: 1.0,
            rotation: 0.0,
            image: r.clone(),
        });
        for &scale in scales {
            let scaled = bicubic_resample(r, scale)?;
            for &rotation in rotations {
                if is_identity(scale, rotation) {
                    continue;
                }
                out.push(RefVariant {
                    ref_index,
                    scale,
                    rotation,
                    image: rotate(&scaled, rotation)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn augment_references(
    refs: &[ImageBuffer],
    scales: &[f64],
    rotations: &[f64],
) -> Result<Vec<ImageBuffer>> {
    Ok(augment_references_tagged(refs, scales, rotations)?
        .into_iter()
        .map(|v| v.image)
        .collect())
}
