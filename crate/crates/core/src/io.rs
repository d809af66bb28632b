//! Little-endian binary containers (`GSET`, `VGRD`, `PNTS`, `TEMB`) plus the
//! small text formats for cameras and poses and the PGM/PPM image writers.
//!
//! Every scalar on disk is an `f32`; decoding widens to `f64`, so a file that
//! has been loaded can be written back byte-for-byte.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::query::TextEmbeddingBank;
use crate::types::{CameraModel, GaussianSet, PointCloud, VoxelGrid, VoxelGridSpec};

pub const GSET_MAGIC: &[u8; 4] = b"GSET";
pub const VGRD_MAGIC: &[u8; 4] = b"VGRD";
pub const PNTS_MAGIC: &[u8; 4] = b"PNTS";
pub const TEMB_MAGIC: &[u8; 4] = b"TEMB";
pub const FORMAT_VERSION: u32 = 1;

pub const VGRD_FLAG_OCCUPANCY: u32 = 1;
pub const VGRD_FLAG_FEATURES: u32 = 2;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| {
                Error::format(
                    self.pos,
                    format!(
                        "truncated file: need {n} bytes, {} remain",
                        self.buf.len() - self.pos
                    ),
                )
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let m = self.take(4)?;
        if m != expected {
            return Err(Error::format(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(m),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn version(&mut self) -> Result<()> {
        let at = self.pos;
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::format(at, format!("unsupported version {v}")));
        }
        Ok(())
    }

    /// Reads `n` finite f32 values, widened to f64.
    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.pos, "array length overflow"))?;
        let start = self.pos;
        let raw = self.take(bytes)?;
        raw.chunks_exact(4)
            .enumerate()
            .map(|(i, c)| {
                let v = f32::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() {
                    Ok(v as f64)
                } else {
                    Err(Error::format(start + 4 * i, format!("non-finite {what} value")))
                }
            })
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        Writer { buf }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }

    fn f32s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f32(*v);
        }
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
}

fn chunk3(v: &[f64]) -> Vec<[f64; 3]> {
    v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn in_file<T>(path: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

fn write_file(path: &Path, encode: impl FnOnce() -> Result<Vec<u8>>) -> Result<()> {
    in_file(path, || Ok(fs::write(path, encode()?)?))
}

// ---------------------------------------------------------------- GSET

pub fn encode_gaussian_set(set: &GaussianSet) -> Result<Vec<u8>> {
    let mut w = Writer::new(GSET_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(to_u32(set.len(), "gaussian count")?);
    w.u32(to_u32(set.feature_dim(), "feature dim")?);
    w.f32s(set.means().iter().flatten());
    w.f32s(set.quats().iter().flatten());
    w.f32s(set.scales().iter().flatten());
    w.f32s(set.opacities());
    w.f32s(set.features());
    Ok(w.buf)
}

pub fn decode_gaussian_set(bytes: &[u8]) -> Result<GaussianSet> {
    let mut r = Reader::new(bytes);
    r.magic(GSET_MAGIC)?;
    r.version()?;
    let n = r.u32()? as usize;
    let dim_at = r.pos;
    let c = r.u32()? as usize;
    if c == 0 {
        return Err(Error::format(dim_at, "feature_dim must be positive"));
    }
    let expected = n
        .checked_mul(11 + c)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(r.pos, "size overflow"))?;
    if bytes.len() - r.pos < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated file: payload needs {expected} bytes"),
        ));
    }
    let means = r.f32s(3 * n, "mean")?;
    let quats = r.f32s(4 * n, "quaternion")?;
    let scale_at = r.pos;
    let scales = r.f32s(3 * n, "scale")?;
    if let Some(i) = scales.iter().position(|s| *s <= 0.0) {
        return Err(Error::format(
            scale_at + 4 * i,
            format!("non-positive scale for gaussian {}", i / 3),
        ));
    }
    let opacities = r.f32s(n, "opacity")?;
    let features = r.f32s(n * c, "feature")?;
    r.finish()?;
    GaussianSet::from_columns(
        c,
        chunk3(&means),
        quats.chunks_exact(4).map(|q| [q[0], q[1], q[2], q[3]]).collect(),
        chunk3(&scales),
        opacities,
        features,
    )
}

pub fn save_gaussian_set(set: &GaussianSet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), || encode_gaussian_set(set))
}

pub fn load_gaussian_set(path: impl AsRef<Path>) -> Result<GaussianSet> {
    in_file(path.as_ref(), || decode_gaussian_set(&fs::read(path.as_ref())?))
}

// ---------------------------------------------------------------- VGRD

pub fn encode_voxel_grid(grid: &VoxelGrid) -> Result<Vec<u8>> {
    grid.validate()?;
    let mut w = Writer::new(VGRD_MAGIC);
    w.u32(FORMAT_VERSION);
    for d in grid.spec.dims {
        w.u32(to_u32(d, "grid dim")?);
    }
    w.f32s(&grid.spec.origin);
    w.f32(grid.spec.voxel_size);
    w.u32(to_u32(grid.feature_dim, "feature dim")?);
    let mut flags = 0;
    if grid.occupancy.is_some() {
        flags |= VGRD_FLAG_OCCUPANCY;
    }
    if grid.features.is_some() {
        flags |= VGRD_FLAG_FEATURES;
    }
    w.u32(flags);
    w.f32s(&grid.density);
    if let Some(occ) = &grid.occupancy {
        w.buf.extend(occ.iter().map(|&b| b as u8));
    }
    if let Some(f) = &grid.features {
        w.f32s(f);
    }
    Ok(w.buf)
}

pub fn decode_voxel_grid(bytes: &[u8]) -> Result<VoxelGrid> {
    let mut r = Reader::new(bytes);
    r.magic(VGRD_MAGIC)?;
    r.version()?;
    let dims_at = r.pos;
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let origin_at = r.pos;
    let o = r.f32s(4, "origin/voxel size")?;
    let feature_dim = r.u32()? as usize;
    let flags_at = r.pos;
    let flags = r.u32()?;
    if flags & !(VGRD_FLAG_OCCUPANCY | VGRD_FLAG_FEATURES) != 0 {
        return Err(Error::format(flags_at, format!("unknown flag bits {flags:#x}")));
    }
    let spec = VoxelGridSpec::new([o[0], o[1], o[2]], dims, o[3]).map_err(|e| {
        let at = if dims.contains(&0) { dims_at } else { origin_at };
        Error::format(at, e.to_string())
    })?;
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| Error::format(dims_at, "voxel count overflow"))?;
    let has_occ = flags & VGRD_FLAG_OCCUPANCY != 0;
    let has_feat = flags & VGRD_FLAG_FEATURES != 0;
    let expected = n
        .checked_mul(4 + has_occ as usize + if has_feat { 4 * feature_dim } else { 0 })
        .ok_or_else(|| Error::format(flags_at, "size overflow"))?;
    if bytes.len() - r.pos < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated file: payload needs {expected} bytes"),
        ));
    }
    let density_at = r.pos;
    let density = r.f32s(n, "density")?;
    if let Some(i) = density.iter().position(|d| *d < 0.0) {
        return Err(Error::format(density_at + 4 * i, "negative density"));
    }
    let occupancy = if has_occ {
        let at = r.pos;
        let raw = r.take(n)?;
        if let Some(i) = raw.iter().position(|b| *b > 1) {
            return Err(Error::format(at + i, "occupancy byte not 0/1"));
        }
        Some(raw.iter().map(|b| *b == 1).collect())
    } else {
        None
    };
    let features = if has_feat {
        Some(r.f32s(n * feature_dim, "feature")?)
    } else {
        None
    };
    r.finish()?;
    Ok(VoxelGrid {
        spec,
        feature_dim,
        density,
        features,
        occupancy,
    })
}

pub fn save_voxel_grid(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), || encode_voxel_grid(grid))
}

pub fn load_voxel_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    in_file(path.as_ref(), || decode_voxel_grid(&fs::read(path.as_ref())?))
}

// ---------------------------------------------------------------- PNTS

pub fn encode_point_cloud(cloud: &PointCloud) -> Result<Vec<u8>> {
    let mut w = Writer::new(PNTS_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(to_u32(cloud.len(), "point count")?);
    w.u32(to_u32(cloud.feature_dim, "feature dim")?);
    w.f32s(cloud.points.iter().flatten());
    w.f32s(&cloud.features);
    Ok(w.buf)
}

pub fn decode_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    let mut r = Reader::new(bytes);
    r.magic(PNTS_MAGIC)?;
    r.version()?;
    let n = r.u32()? as usize;
    let c = r.u32()? as usize;
    let expected = n
        .checked_mul(3 + c)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(r.pos, "size overflow"))?;
    if bytes.len() - r.pos < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated file: payload needs {expected} bytes"),
        ));
    }
    let xyz = r.f32s(3 * n, "coordinate")?;
    let features = r.f32s(n * c, "feature")?;
    r.finish()?;
    PointCloud::new(c, chunk3(&xyz), features)
}

pub fn save_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), || encode_point_cloud(cloud))
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    in_file(path.as_ref(), || decode_point_cloud(&fs::read(path.as_ref())?))
}

// ---------------------------------------------------------------- TEMB

pub fn encode_embedding_bank(bank: &TextEmbeddingBank) -> Result<Vec<u8>> {
    let mut w = Writer::new(TEMB_MAGIC);
    w.u32(to_u32(bank.num_classes(), "class count")?);
    w.u32(to_u32(bank.dim(), "embedding dim")?);
    for name in bank.names() {
        w.u32(to_u32(name.len(), "name length")?);
        w.buf.extend_from_slice(name.as_bytes());
    }
    w.f32s(bank.matrix());
    Ok(w.buf)
}

pub fn decode_embedding_bank(bytes: &[u8]) -> Result<TextEmbeddingBank> {
    let mut r = Reader::new(bytes);
    r.magic(TEMB_MAGIC)?;
    let nc = r.u32()? as usize;
    let c = r.u32()? as usize;
    let mut names = Vec::with_capacity(nc.min(1 << 16));
    for _ in 0..nc {
        let len = r.u32()? as usize;
        let at = r.pos;
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|e| Error::format(at, format!("class name not UTF-8: {e}")))?;
        names.push(name.to_owned());
    }
    let matrix_at = r.pos;
    let n = nc
        .checked_mul(c)
        .ok_or_else(|| Error::format(matrix_at, "size overflow"))?;
    let matrix = r.f32s(n, "embedding")?;
    r.finish()?;
    TextEmbeddingBank::new(names, c, matrix).map_err(|e| Error::format(matrix_at, e.to_string()))
}

pub fn save_embedding_bank(bank: &TextEmbeddingBank, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), || encode_embedding_bank(bank))
}

pub fn load_embedding_bank(path: impl AsRef<Path>) -> Result<TextEmbeddingBank> {
    in_file(path.as_ref(), || decode_embedding_bank(&fs::read(path.as_ref())?))
}

// ---------------------------------------------------------------- text formats

fn parse_floats(line_no: usize, s: &str, n: usize) -> Result<Vec<f64>> {
    let vals = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(line_no, format!("bad number: {e}")))?;
    if vals.len() != n {
        return Err(Error::format(
            line_no,
            format!("expected {n} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// Parses a camera file with `K:`, `E:` and `size:` rows. Format errors carry
/// the 1-based line number as their offset.
pub fn parse_camera(text: &str) -> Result<CameraModel> {
    let mut k = None;
    let mut e = None;
    let mut size = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::format(line_no, "expected `key: values`"))?;
        match key.trim() {
            "K" => k = Some(Matrix3::from_row_slice(&parse_floats(line_no, rest, 9)?)),
            "E" => e = Some(Matrix4::from_row_slice(&parse_floats(line_no, rest, 16)?)),
            "size" => {
                let v = parse_floats(line_no, rest, 2)?;
                if v.iter().any(|x| x.fract() != 0.0 || *x <= 0.0) {
                    return Err(Error::format(line_no, "size must be positive integers"));
                }
                size = Some((v[0] as usize, v[1] as usize));
            }
            other => return Err(Error::format(line_no, format!("unknown key `{other}`"))),
        }
    }
    let k = k.ok_or_else(|| Error::format(0, "missing K row"))?;
    let e = e.ok_or_else(|| Error::format(0, "missing E row"))?;
    let (w, h) = size.ok_or_else(|| Error::format(0, "missing size row"))?;
    CameraModel::new(k, e, w, h)
}

pub fn format_camera(cam: &CameraModel) -> String {
    let row = |it: Vec<f64>| {
        it.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let k: Vec<f64> = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| cam.intrinsics[(r, c)])
        .collect();
    let e: Vec<f64> = (0..4)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| cam.extrinsic[(r, c)])
        .collect();
    format!(
        "K: {}\nE: {}\nsize: {} {}\n",
        row(k),
        row(e),
        cam.width,
        cam.height
    )
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<CameraModel> {
    in_file(path.as_ref(), || parse_camera(&fs::read_to_string(path.as_ref())?))
}

/// Parses 16 whitespace-separated floats (row-major 4x4).
pub fn parse_pose(text: &str) -> Result<Matrix4<f64>> {
    let body: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ");
    let v = parse_floats(1, &body, 16)?;
    let m = Matrix4::from_row_slice(&v);
    crate::types::check_rigid(&m).map_err(|r| Error::format(1, r))?;
    Ok(m)
}

pub fn format_pose(m: &Matrix4<f64>) -> String {
    (0..4)
        .map(|r| {
            (0..4)
                .map(|c| format!("{:?}", m[(r, c)]))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn load_pose(path: impl AsRef<Path>) -> Result<Matrix4<f64>> {
    in_file(path.as_ref(), || parse_pose(&fs::read_to_string(path.as_ref())?))
}

// ---------------------------------------------------------------- images

/// 16-bit binary PGM; `values` are row-major and clamped to `[0, 65535]`
/// after scaling.
pub fn encode_pgm16(width: usize, height: usize, values: &[f64], scale: f64) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// 8-bit binary PPM from row-major RGB triples in `[0, 1]`.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[f64; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        for c in px {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gaussian;

    fn sample_set() -> GaussianSet {
        GaussianSet::from_gaussians(
            2,
            [
                Gaussian::isotropic([1.0, 2.0, 3.0], 1.0, 0.5, vec![0.25, -1.0]),
                Gaussian {
                    mean: [-4.5, 0.0, 8.0],
                    quat: [0.0, 1.0, 0.0, 0.0],
                    scale: [0.5, 2.0, 0.125],
                    opacity: 1.0,
                    feature: vec![3.0, 0.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_set_is_header_only() {
        let set = GaussianSet::empty(16).unwrap();
        let bytes = encode_gaussian_set(&set).unwrap();
        assert_eq!(bytes.len(), 16);
        let back = decode_gaussian_set(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.feature_dim(), 16);
    }

    #[test]
    fn gaussian_set_round_trip() {
        let set = sample_set();
        let bytes = encode_gaussian_set(&set).unwrap();
        assert_eq!(decode_gaussian_set(&bytes).unwrap(), set);
    }

    #[test]
    fn bad_magic_names_offset_zero() {
        let mut bytes = encode_gaussian_set(&sample_set()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            decode_gaussian_set(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = encode_gaussian_set(&sample_set()).unwrap();
        for cut in [3, 10, 20, bytes.len() - 1] {
            assert!(matches!(
                decode_gaussian_set(&bytes[..cut]),
                Err(Error::Format { .. })
            ));
        }
    }

    #[test]
    fn nan_and_zero_scale_report_offsets() {
        let bytes = encode_gaussian_set(&sample_set()).unwrap();
        // first mean component of gaussian 1 sits right after the header + 3 floats
        let mut b = bytes.clone();
        b[16 + 12..16 + 16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_gaussian_set(&b),
            Err(Error::Format { offset: 28, .. })
        ));
        let scale_at = 16 + 4 * (6 + 8);
        let mut b = bytes;
        b[scale_at + 4..scale_at + 8].copy_from_slice(&0f32.to_le_bytes());
        assert!(matches!(
            decode_gaussian_set(&b),
            Err(Error::Format { offset, .. }) if offset == scale_at + 4
        ));
    }

    #[test]
    fn opacity_out_of_range_is_validation_error() {
        let mut bytes = encode_gaussian_set(&sample_set()).unwrap();
        let opacity_at = 16 + 4 * (6 + 8 + 6);
        bytes[opacity_at..opacity_at + 4].copy_from_slice(&1.5f32.to_le_bytes());
        assert!(matches!(
            decode_gaussian_set(&bytes),
            Err(Error::InvalidGaussian { index: 0, .. })
        ));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let set = sample_set();
        let err = save_gaussian_set(&set, "/nonexistent-dir/x/y.gset").unwrap_err();
        assert!(matches!(err.root(), Error::Io(_)));
        assert!(err.to_string().contains("y.gset"));
    }

    #[test]
    fn voxel_grid_round_trip_with_all_sections() {
        let spec = VoxelGridSpec::new([-1.0, 0.5, 2.0], [2, 3, 1], 0.25).unwrap();
        let grid = VoxelGrid {
            spec,
            feature_dim: 2,
            density: (0..6).map(|i| i as f64 * 0.5).collect(),
            features: Some((0..12).map(|i| i as f64 - 6.0).collect()),
            occupancy: Some(vec![true, false, true, true, false, false]),
        };
        let bytes = encode_voxel_grid(&grid).unwrap();
        assert_eq!(bytes.len(), 44 + 6 * 4 + 6 + 12 * 4);
        assert_eq!(decode_voxel_grid(&bytes).unwrap(), grid);
    }

    #[test]
    fn camera_text_round_trip() {
        let cam = CameraModel::pinhole(500.0, 320.0, 240.0, 640, 480).unwrap();
        let back = parse_camera(&format_camera(&cam)).unwrap();
        assert_eq!(back, cam);
        assert!(matches!(
            parse_camera("K: 1 2 3\n"),
            Err(Error::Format { offset: 1, .. })
        ));
    }

    #[test]
    fn pose_parsing() {
        let m = parse_pose("1 0 0 2\n0 1 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
        assert_eq!(m[(0, 3)], 2.0);
        assert_eq!(parse_pose(&format_pose(&m)).unwrap(), m);
        assert!(parse_pose("1 0 0").is_err());
    }

    #[test]
    fn pgm_header_and_payload() {
        let b = encode_pgm16(2, 1, &[1.5, 100.0], 1000.0);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&b[..header.len()], header);
        assert_eq!(&b[header.len()..], &[0x05, 0xDC, 0xFF, 0xFF]);
    }
}
