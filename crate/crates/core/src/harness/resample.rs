use crate::error::Result;
use crate::slavc::LocalizationMap;

/// Bilinear resampling with pixel-center alignment (corners of the source
/// and target frames coincide); edge samples are clamped.
pub fn resample_bilinear(
    map: &LocalizationMap,
    height: usize,
    width: usize,
) -> Result<LocalizationMap> {
    let (h, w) = (map.height(), map.width());
    if (h, w) == (height, width) {
        return Ok(map.clone());
    }
    let src = map.values().data();
    let coord = |i: usize, from: usize, to: usize| -> (usize, usize, f64) {
        let x = ((i as f64 + 0.5) * from as f64 / to as f64 - 0.5).clamp(0.0, (from - 1) as f64);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(from - 1);
        (lo, hi, x - lo as f64)
    };
    let cols: Vec<_> = (0..width).map(|c| coord(c, w, width)).collect();
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let (r0, r1, fy) = coord(r, h, height);
        for &(c0, c1, fx) in &cols {
            let top = src[r0 * w + c0] * (1.0 - fx) + src[r0 * w + c1] * fx;
            let bottom = src[r1 * w + c0] * (1.0 - fx) + src[r1 * w + c1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    LocalizationMap::from_rows(height, width, out)
}
