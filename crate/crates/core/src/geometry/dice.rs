use super::GeometryError;
use crate::raster::BinaryMask;

/// `2|A ∩ B| / (|A| + |B|)` counted over pixels inside `valid`; 0 when both
/// restricted masks are empty.
pub fn dice_coefficient(
    a: &BinaryMask,
    b: &BinaryMask,
    valid: &BinaryMask,
) -> Result<f64, GeometryError> {
    for other in [b, valid] {
        if other.dims() != a.dims() {
            return Err(GeometryError::DimensionMismatch {
                a: a.dims(),
                b: other.dims(),
            });
        }
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for ((&x, &y), &v) in a.bits().iter().zip(b.bits()).zip(valid.bits()) {
        if v {
            na += x as usize;
            nb += y as usize;
            inter += (x && y) as usize;
        }
    }
    if na + nb == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}
