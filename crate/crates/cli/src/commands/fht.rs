use std::path::Path;

use houghvp::fht::{fht_join, fht_quadrant, pad_for, HoughSpace, Quadrant};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{load_gray, write_raw_map, RawHeader};

/// Hough map of one quadrant or joined pair. The integration axis is zero
/// padded to a power of two first.
pub fn cmd_fht(input: &Path, quadrant: &str, out: &Path, cfg: &RunConfig) -> CliResult<RawHeader> {
    let q = Quadrant::parse(quadrant).ok_or_else(|| CliError::input(format!("unknown quadrant {quadrant:?}; expected H1..H4, H12 or H34")))?;
    let img = load_gray(input)?;
    let space = match q {
        Quadrant::H1 | Quadrant::H2 | Quadrant::H12 => HoughSpace::H12,
        Quadrant::H3 | Quadrant::H4 | Quadrant::H34 => HoughSpace::H34,
    };
    let padded = pad_for(&img, space)?;
    let map = if q.is_joined() { fht_join(&padded, space)? } else { fht_quadrant(&padded, q)? };
    write_raw_map(out, &map.data, map.alpha_size, map.s_size, q.name(), (map.src_w, map.src_h), cfg)
}
