use g2v_core::geometry::project_point;
use g2v_core::labeler::{
    aggregate_frames, compute_visibility_grid, decorate_points, generate_pseudo_labels, voxelize_labels, Aggregation,
    FeatureMap, LabelConfig, LabelFrame, Sampling,
};
use g2v_core::query::{iou_miou, semantic_occupancy, MiouAveraging, QueryConfig};
use g2v_core::synth::{box_world, look_at, rng, voxel_gaussians, LabeledBox};
use g2v_core::types::{invert_rigid, transform_point};
use g2v_core::{CameraModel, PointCloud, SemanticGrid, TextEmbeddingBank, VoxelGridSpec};
use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_map(seed: u64, w: usize, h: usize, c: usize) -> FeatureMap {
    let mut r = rng(seed);
    FeatureMap::new(w, h, c, (0..w * h * c).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn bilinear_matches_hand_interpolation() {
    let m = random_map(1, 7, 5, 3);
    let mut r = rng(2);
    let mut out = [0.0; 3];
    for _ in 0..500 {
        let (x, y) = (r.random_range(0.0..6.0), r.random_range(0.0..4.0));
        m.sample([x, y], Sampling::Bilinear, &mut out);
        let (i, j) = (x.floor() as usize, y.floor() as usize);
        let (a, b) = (x - i as f64, y - j as f64);
        for k in 0..3 {
            let top = m.node(i, j)[k] * (1.0 - a) + m.node(i + 1, j)[k] * a;
            let bottom = m.node(i, j + 1)[k] * (1.0 - a) + m.node(i + 1, j + 1)[k] * a;
            let expect = top * (1.0 - b) + bottom * b;
            assert!((out[k] - expect).abs() <= 1e-14);
        }
    }
    // cell center: mean of the four surrounding nodes
    m.sample([2.5, 1.5], Sampling::Bilinear, &mut out);
    for k in 0..3 {
        let mean = (m.node(2, 1)[k] + m.node(3, 1)[k] + m.node(2, 2)[k] + m.node(3, 2)[k]) / 4.0;
        assert!((out[k] - mean).abs() <= 1e-15);
    }
    // clamped outside, nearest rounds half up
    m.sample([-3.0, 9.0], Sampling::Bilinear, &mut out);
    assert_eq!(out, *<&[f64; 3]>::try_from(m.node(0, 4)).unwrap());
    m.sample([2.5, 0.49], Sampling::Nearest, &mut out);
    assert_eq!(out, *<&[f64; 3]>::try_from(m.node(3, 0)).unwrap());
}

#[test]
fn feature_map_spans_the_image() {
    // a 4×4 map over a 16×16 image: node centers at pixels 1.5, 5.5, ...
    let m = random_map(3, 4, 4, 1);
    assert_eq!(m.map_coords([1.5, 5.5], 16, 16), [0.0, 1.0]);
    assert_eq!(m.map_coords([-0.5, 15.5], 16, 16), [-0.5, 3.5]);
}

fn random_camera<R: Rng>(r: &mut R) -> CameraModel {
    let f = r.random_range(20.0..80.0);
    let (w, h) = (r.random_range(16..64), r.random_range(16..64));
    let k = Matrix3::new(f, 0.0, w as f64 / 2.0, 0.0, f * r.random_range(0.8..1.2), h as f64 / 2.0, 0.0, 0.0, 1.0);
    let eye = Vector3::new(r.random_range(-6.0..6.0), r.random_range(-6.0..6.0), r.random_range(-1.0..4.0));
    let target = Vector3::new(r.random_range(0.0..4.0), r.random_range(0.0..4.0), r.random_range(0.0..2.0));
    let pose = look_at(eye, target).unwrap();
    CameraModel::new(k, invert_rigid(&pose), w, h).unwrap()
}

#[test]
fn decoration_visibility_is_projection_visibility() {
    let mut r = rng(4);
    for _ in 0..20 {
        let cam = random_camera(&mut r);
        let points: Vec<[f64; 3]> = (0..300)
            .map(|_| std::array::from_fn(|_| r.random_range(-8.0..8.0)))
            .collect();
        let frame = LabelFrame::new(points.clone(), Matrix4::identity(), cam.clone(), random_map(5, 8, 8, 2)).unwrap();
        let d = decorate_points(&frame, Sampling::Bilinear);
        for (i, p) in points.iter().enumerate() {
            assert_eq!(d.visible[i], project_point(&Vector3::from(*p), &cam).visible);
            if !d.visible[i] {
                assert_eq!(&d.features[2 * i..2 * i + 2], &[0.0, 0.0]);
            }
        }
    }
}

#[test]
fn visibility_grid_matches_projection_oracle() {
    let spec = VoxelGridSpec::new([0.0, 0.0, 0.0], [8, 8, 4], 0.5).unwrap();
    let mut r = rng(6);
    for _ in 0..10 {
        let cams: Vec<CameraModel> = (0..r.random_range(1..4)).map(|_| random_camera(&mut r)).collect();
        let grid = compute_visibility_grid(&spec, &cams);
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..4 {
                    let c = Vector3::new((i as f64 + 0.5) * 0.5, (j as f64 + 0.5) * 0.5, (k as f64 + 0.5) * 0.5);
                    let expect = cams.iter().any(|cam| {
                        let pc = cam.extrinsic.fixed_view::<3, 3>(0, 0) * c + cam.extrinsic.fixed_view::<3, 1>(0, 3);
                        if pc[2] <= 0.0 {
                            return false;
                        }
                        let u = (cam.intrinsics * pc)[0] / pc[2];
                        let v = (cam.intrinsics * pc)[1] / pc[2];
                        (0.0..cam.width as f64).contains(&u) && (0.0..cam.height as f64).contains(&v)
                    });
                    assert_eq!(grid[(k * 8 + j) * 8 + i], expect);
                }
            }
        }
    }
    // facing +x: a voxel on the axis is visible, one behind is not
    let pose = look_at(Vector3::new(-10.0, 2.0, 1.0), Vector3::new(0.0, 2.0, 1.0)).unwrap();
    let cam = CameraModel::new(Matrix3::new(10.0, 0.0, 8.0, 0.0, 10.0, 8.0, 0.0, 0.0, 1.0), invert_rigid(&pose), 16, 16).unwrap();
    let small = VoxelGridSpec::new([-12.0, 1.5, 0.5], [4, 1, 1], 1.0).unwrap();
    assert_eq!(compute_visibility_grid(&small, &[cam]), vec![false, false, true, true]);
}

#[test]
fn two_translated_frames_add_up() {
    let cam = CameraModel::pinhole(10.0, 8.0, 8.0, 16, 16).unwrap();
    let pts = vec![[0.0, 0.0, 2.0], [0.5, -0.5, 3.0], [0.0, 0.0, -1.0]];
    let mut pose_a = Matrix4::identity();
    pose_a[(0, 3)] = 5.0;
    let mut pose_b = Matrix4::identity();
    pose_b[(1, 3)] = -2.0;
    let map = random_map(7, 16, 16, 2);
    let frames = vec![
        LabelFrame::new(pts.clone(), pose_a, cam.clone(), map.clone()).unwrap(),
        LabelFrame::new(pts.clone(), pose_b, cam, map).unwrap(),
    ];
    let cloud = aggregate_frames(&frames, Sampling::Bilinear).unwrap();
    assert_eq!(cloud.points.len(), 4);
    assert_eq!(cloud.points[0], [5.0, 0.0, 2.0]);
    assert_eq!(cloud.points[1], [5.5, -0.5, 3.0]);
    assert_eq!(cloud.points[2], [0.0, -2.0, 2.0]);
    assert_eq!(cloud.points[3], [0.5, -2.5, 3.0]);
    assert_eq!(cloud.feature(0), cloud.feature(2));

    let single = aggregate_frames(&frames[..1], Sampling::Nearest).unwrap();
    assert_eq!(single.points.len(), 2);
}

#[test]
fn circling_camera_reconstructs_the_cube() {
    let mut r = rng(8);
    let cube: Vec<Vector3<f64>> = (0..400)
        .map(|_| Vector3::from_fn(|_, _| r.random_range(-1.0..1.0)))
        .collect();
    let cam = CameraModel::pinhole(20.0, 32.0, 32.0, 64, 64).unwrap();
    let mut frames = Vec::new();
    let mut expected = Vec::new();
    for k in 0..8 {
        let a = std::f64::consts::TAU * k as f64 / 8.0;
        let pose = look_at(Vector3::new(6.0 * a.cos(), 6.0 * a.sin(), 1.0), Vector3::zeros()).unwrap();
        let inv = invert_rigid(&pose);
        // each sweep returns the points of its own octant-ish slice
        let slice: Vec<&Vector3<f64>> = cube.iter().skip(k).step_by(8).collect();
        let pts = slice.iter().map(|p| { let q = transform_point(&inv, p); [q[0], q[1], q[2]] }).collect();
        expected.extend(slice.into_iter().copied());
        frames.push(LabelFrame::new(pts, pose, cam.clone(), random_map(9, 8, 8, 1)).unwrap());
    }
    let cloud = aggregate_frames(&frames, Sampling::Bilinear).unwrap();
    assert_eq!(cloud.points.len(), cube.len());
    for (p, e) in cloud.points.iter().zip(&expected) {
        assert!((Vector3::from(*p) - e).norm() <= 1e-6);
    }
    let mut got: Vec<[f64; 3]> = cloud.points.clone();
    let mut want: Vec<[f64; 3]> = cube.iter().map(|p| [p[0], p[1], p[2]]).collect();
    let key = |a: &[f64; 3], b: &[f64; 3]| a[0].total_cmp(&b[0]);
    got.sort_by(key);
    want.sort_by(key);
    for (g, w) in got.iter().zip(&want) {
        assert!((Vector3::from(*g) - Vector3::from(*w)).norm() <= 1e-6);
    }
}

fn random_cloud(seed: u64, n: usize, c: usize) -> PointCloud {
    let mut r = rng(seed);
    let pts = (0..n).map(|_| std::array::from_fn(|_| r.random_range(-0.5..2.5))).collect();
    PointCloud::new(c, pts, (0..n * c).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn point_counts_are_conserved() {
    let spec = VoxelGridSpec::new([0.0; 3], [4, 4, 4], 0.5).unwrap();
    for seed in 0..20 {
        let cloud = random_cloud(seed, 500, 2);
        let g = voxelize_labels(&cloud, &spec, Aggregation::Mean);
        let inside = cloud.points.iter().filter(|p| p.iter().all(|&x| (0.0..2.0).contains(&x))).count();
        assert_eq!(g.dropped, 500 - inside);
        assert_eq!(g.point_counts.iter().map(|&n| n as usize).sum::<usize>() + g.dropped, 500);
        for v in 0..spec.num_voxels() {
            assert_eq!(g.occupancy[v], g.point_counts[v] > 0);
            if !g.occupancy[v] {
                assert!(g.feature_row(v).iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn voxel_feature_is_member_mean_and_vote() {
    let spec = VoxelGridSpec::new([0.0; 3], [2, 2, 2], 1.0).unwrap();
    let cloud = PointCloud::new(
        3,
        vec![[0.1, 0.1, 0.1], [0.9, 0.2, 0.3], [0.5, 0.5, 0.5], [1.5, 1.5, 1.5]],
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 2.0, 0.0, 0.0, -1.0],
    )
    .unwrap();
    let g = voxelize_labels(&cloud, &spec, Aggregation::Mean);
    assert_eq!(g.feature_row(0), &[0.5, 1.0 / 3.0, 2.0 / 3.0]);
    assert_eq!(g.feature_row(7), &[0.0, 0.0, -1.0]);
    let v = voxelize_labels(&cloud, &spec, Aggregation::MajorityVote);
    // argmaxes 0, 1, 2: a three-way tie goes to the lowest channel
    assert_eq!(v.feature_row(0), &[1.0, 0.0, 0.0]);
    assert_eq!(v.feature_row(7), &[1.0, 0.0, 0.0]);
}

proptest! {
    #[test]
    fn voxelization_ignores_point_order(seed in 0u64..500) {
        let spec = VoxelGridSpec::new([0.0; 3], [4, 4, 4], 0.5).unwrap();
        let cloud = random_cloud(seed, 200, 3);
        let mut order: Vec<usize> = (0..200).collect();
        order.shuffle(&mut rng(seed + 1));
        let shuffled = PointCloud::new(
            3,
            order.iter().map(|&i| cloud.points[i]).collect(),
            order.iter().flat_map(|&i| cloud.feature(i).to_vec()).collect(),
        )
        .unwrap();
        let a = voxelize_labels(&cloud, &spec, Aggregation::Mean);
        let b = voxelize_labels(&shuffled, &spec, Aggregation::Mean);
        prop_assert_eq!(&a.occupancy, &b.occupancy);
        prop_assert_eq!(&a.point_counts, &b.point_counts);
        for (x, y) in a.features.iter().zip(&b.features) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let a = voxelize_labels(&cloud, &spec, Aggregation::MajorityVote);
        let b = voxelize_labels(&shuffled, &spec, Aggregation::MajorityVote);
        prop_assert_eq!(a.features, b.features);
    }
}

fn bank4() -> TextEmbeddingBank {
    let names = ["road", "car", "tree", "building"].map(String::from).to_vec();
    TextEmbeddingBank::one_hot(names, 4).unwrap()
}

fn boxes() -> Vec<LabeledBox> {
    vec![
        LabeledBox { min: [0.0, 0.0, 0.0], max: [6.0, 6.0, 0.5], class: 0 },
        LabeledBox { min: [1.0, 1.0, 0.9], max: [2.6, 2.0, 2.0], class: 1 },
        LabeledBox { min: [4.0, 4.0, 0.9], max: [4.8, 4.8, 3.0], class: 2 },
        LabeledBox { min: [3.6, 0.4, 0.9], max: [5.6, 2.4, 2.4], class: 3 },
    ]
}

#[test]
fn rigid_motion_relabels_by_voxel_permutation() {
    let spec = VoxelGridSpec::new([0.0; 3], [16, 12, 8], 0.4).unwrap();
    let world = box_world(10, &spec, &boxes(), &bank4(), 3).unwrap();
    let base = generate_pseudo_labels(&world.frames, &spec, &LabelConfig::default()).unwrap();

    // quarter turn about z followed by a shift
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::new(3.0, -7.0, 1.0));
    let frames: Vec<LabelFrame> = world
        .frames
        .iter()
        .map(|f| LabelFrame::new(f.points.clone(), t * f.pose, f.camera.clone(), f.feature_map.clone()).unwrap())
        .collect();
    let [nx, ny, nz] = spec.dims;
    let hi = spec.max_corner();
    let moved = VoxelGridSpec::new([3.0 - hi[1], -7.0 + spec.origin[0], 1.0 + spec.origin[2]], [ny, nx, nz], 0.4).unwrap();
    let out = generate_pseudo_labels(&frames, &moved, &LabelConfig::default()).unwrap();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let v = spec.linear_index(i, j, k);
                let w = moved.linear_index(ny - 1 - j, i, k);
                assert_eq!(base.occupancy[v], out.occupancy[w]);
                assert_eq!(base.point_counts[v], out.point_counts[w]);
                assert_eq!(base.visibility[v], out.visibility[w]);
                for (a, b) in base.feature_row(v).iter().zip(out.feature_row(w)) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn box_world_round_trip_is_exact() {
    let spec = VoxelGridSpec::new([0.0; 3], [16, 16, 8], 0.4).unwrap();
    let bank = bank4();
    let world = box_world(11, &spec, &boxes(), &bank, 2).unwrap();
    let labels = generate_pseudo_labels(&world.frames, &spec, &LabelConfig::default()).unwrap();
    let expected_occ: Vec<bool> = world.gt.iter().map(Option::is_some).collect();
    assert_eq!(labels.occupancy, expected_occ);
    let set = voxel_gaussians(&labels, 0.25, 1.0).unwrap();
    let pred = semantic_occupancy(&set, &bank, &spec, &QueryConfig::default()).unwrap();
    let gt = SemanticGrid::new(spec, 4, world.gt.clone()).unwrap();
    let rep = iou_miou(&pred, &gt, None, MiouAveraging::GroundTruth).unwrap();
    assert_eq!(rep.iou, 1.0);
    assert_eq!(rep.miou, Some(1.0));
    assert_eq!(rep.averaged_classes, 4);
}

#[test]
fn label_grid_survives_the_grid_file() {
    let spec = VoxelGridSpec::new([0.0; 3], [4, 4, 4], 0.5).unwrap();
    let g = voxelize_labels(&random_cloud(30, 300, 2), &spec, Aggregation::Mean);
    let bytes = g2v_core::io::encode_voxel_grid(&g.to_voxel_grid()).unwrap();
    let back = g2v_core::labeler::PseudoLabelGrid::from_voxel_grid(&g2v_core::io::decode_voxel_grid(&bytes).unwrap()).unwrap();
    assert_eq!(back.point_counts, g.point_counts);
    assert_eq!(back.occupancy, g.occupancy);
    for (a, b) in back.features.iter().zip(&g.features) {
        assert!((a - b).abs() <= 1e-6);
    }
}
