//! Binned reference reconstructions: a density-compensated direct adjoint per
//! bin, and full-resolution temporal-TV (GRASP-style) reconstruction.

use alloc::vec::Vec;

use crate::error::{shape, Result};
use crate::fourier::{coil_images, density_compensated_adjoint};
use crate::image::{DynamicImage, GridSpec};
use crate::phantom::CoilMaps;
use crate::subspace::{grasp_reconstruct, GraspConfig};
use crate::trajectory::{bin_spokes, SpokeSet};

/// One density-compensated, coil-combined adjoint frame per bin of
/// `spokes_per_bin` consecutive spokes, placed at the bin-centre time.
pub fn nufft_baseline(spokes: &SpokeSet, coils: &CoilMaps, spokes_per_bin: usize, grid: &GridSpec) -> Result<DynamicImage> {
    spokes.validate()?;
    grid.validate()?;
    if coils.n_coils() != spokes.n_coils {
        return Err(shape!("{} coil maps for {} coils", coils.n_coils(), spokes.n_coils));
    }
    let bins = bin_spokes(&spokes.geometry, spokes_per_bin)?;
    let maps = coil_images(coils, grid);
    let frames = crate::par::try_map_indexed(bins.bins.len(), |b| {
        let members: Vec<usize> = bins.bins[b].members.clone().collect();
        density_compensated_adjoint(&spokes.select(&members), &maps, grid)
    })?;
    DynamicImage::from_frames(*grid, bins.center_times(), &frames)
}

/// Temporal-TV reconstruction of every bin on the full-resolution grid.
pub fn grasp_baseline(
    spokes: &SpokeSet,
    coils: &CoilMaps,
    spokes_per_bin: usize,
    grid: &GridSpec,
    cfg: &GraspConfig,
) -> Result<DynamicImage> {
    spokes.validate()?;
    let bins = bin_spokes(&spokes.geometry, spokes_per_bin)?;
    grasp_reconstruct(spokes, &bins, coils, grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{golden_angle_geometry, zero_spoke_set, DEFAULT_TR, TINY_GOLDEN_ANGLE_DEG};

    #[test]
    fn frame_counts_follow_bins() {
        let geometry = golden_angle_geometry(800, 16, 64.0, DEFAULT_TR, TINY_GOLDEN_ANGLE_DEG).unwrap();
        let spokes = zero_spoke_set(geometry, 1, DEFAULT_TR);
        let grid = GridSpec::new(8, 64.0).unwrap();
        let coils = CoilMaps::uniform();
        assert_eq!(nufft_baseline(&spokes, &coils, 20, &grid).unwrap().n_frames(), 40);
        assert_eq!(nufft_baseline(&spokes, &coils, 40, &grid).unwrap().n_frames(), 20);
        let d = nufft_baseline(&spokes, &coils, 30, &grid).unwrap();
        assert_eq!(d.n_frames(), 26);
        assert!(d.data.iter().all(|z| z.norm() == 0.0));
        assert!(nufft_baseline(&spokes, &coils, 0, &grid).is_err());
        assert!(nufft_baseline(&spokes, &coils, 801, &grid).is_err());
    }
}
