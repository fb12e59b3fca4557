use crate::error::{Error, Result};
use crate::slavc::LocalizationMap;

pub const DEFAULT_RADIUS_FRACTION: f64 = 0.3;

/// Gaussian bump centered on the frame center.
///
/// The center sits at `((H - 1) / 2, (W - 1) / 2)` in pixel-center
/// coordinates, so the map is mirror-symmetric along both axes. The profile
/// width is `radius_fraction * min(H, W) / 2`.
pub fn center_prior_map(
    height: usize,
    width: usize,
    radius_fraction: f64,
) -> Result<LocalizationMap> {
    if !(radius_fraction > 0.0 && radius_fraction <= 1.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "radius fraction must lie in (0, 1], got {radius_fraction}"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::Structural("frame extents must be nonzero".into()));
    }
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let sigma = radius_fraction * height.min(width) as f64 / 2.0;
    let denom = 2.0 * sigma * sigma;
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
            data.push((-d2 / denom).exp());
        }
    }
    LocalizationMap::from_rows(height, width, data)
}
