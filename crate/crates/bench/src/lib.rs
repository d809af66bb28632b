//! Seeded fixtures shared by the criterion benches.

use g2v_core::prepared::PreparedGaussians;
use g2v_core::synth::{random_scene, random_upstream, SceneConfig};
use g2v_core::{build_dual_csr_prepared, splat_forward_prepared, DualCsr, SplatOutput, VoxelGridSpec};

/// A random scene with its binning, forward output and an upstream gradient.
pub struct Fixture {
    pub spec: VoxelGridSpec,
    pub prep: PreparedGaussians,
    pub csr: DualCsr,
    pub forward: SplatOutput,
    pub upstream: Vec<f64>,
}

impl Fixture {
    pub fn new(seed: u64, gaussians: usize, feature_dim: usize, spec: VoxelGridSpec) -> Self {
        let set = random_scene(seed, &spec, &SceneConfig::new(gaussians, feature_dim)).expect("scene");
        let prep = PreparedGaussians::from_set(&set).expect("prepared");
        let csr = build_dual_csr_prepared(&prep, &spec, 3.0).expect("binning");
        let forward = splat_forward_prepared(&prep, &csr, &spec).expect("forward");
        let upstream = random_upstream(seed + 1, spec.num_voxels() * feature_dim);
        Fixture {
            spec,
            prep,
            csr,
            forward,
            upstream,
        }
    }

    /// Cube of `side` voxels of 0.4 m.
    pub fn cube(seed: u64, gaussians: usize, feature_dim: usize, side: usize) -> Self {
        Self::new(seed, gaussians, feature_dim, VoxelGridSpec::new([0.0; 3], [side; 3], 0.4).expect("grid"))
    }
}
