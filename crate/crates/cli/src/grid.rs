use clap::Args;
use g2v_core::VoxelGridSpec;

use crate::error::{CliError, CliResult};

/// Grid selection shared by the subcommands that build a grid.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// named grid: nuscenes or custom
    #[arg(long, conflicts_with_all = ["dims", "origin", "voxel_size"])]
    pub grid_preset: Option<String>,
    /// voxel counts, `nx,ny,nz`
    #[arg(long, value_parser = parse_triple::<usize>)]
    pub dims: Option<[usize; 3]>,
    /// minimum corner in meters, `x,y,z`
    #[arg(long, value_parser = parse_triple::<f64>, allow_hyphen_values = true)]
    pub origin: Option<[f64; 3]>,
    /// voxel edge in meters
    #[arg(long)]
    pub voxel_size: Option<f64>,
}

impl GridArgs {
    /// Explicit dims win, then the preset, then `default`.
    pub fn spec(&self, default: &str) -> CliResult<VoxelGridSpec> {
        if let Some(dims) = self.dims {
            let origin = self.origin.unwrap_or([0.0; 3]);
            return Ok(VoxelGridSpec::new(origin, dims, self.voxel_size.unwrap_or(1.0))?);
        }
        if self.origin.is_some() || self.voxel_size.is_some() {
            return Err(CliError::Usage("--origin and --voxel-size need --dims".into()));
        }
        let name = self.grid_preset.as_deref().unwrap_or(default);
        VoxelGridSpec::preset(name).ok_or_else(|| CliError::Usage(format!("unknown grid preset {name:?}")))
    }
}

/// `a,b,c` into three values.
pub fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got {s:?}"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|e| format!("{p:?}: {e}"))?);
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}
