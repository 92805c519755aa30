use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdfmap::analysis::bench::{render_scans, run_sim_bench, SimBenchConfig};
use sdfmap::analysis::surface_error;
use sdfmap::sim::{ground_truth_esdf, render_depth, sample_viewpoints, Bounds, Camera, Primitive, World};
use sdfmap::{GlobalVoxelIndex, Layer, Point3, Pose, TsdfConfig, TsdfIntegrator};

fn plane_world(depth: f64) -> World {
    World::new(
        Bounds::new(Point3::new(-5.0, -5.0, -1.0), Point3::new(5.0, 5.0, 9.0)).unwrap(),
        vec![Primitive::plane(Point3::new(0.0, 0.0, -1.0), -depth).unwrap()],
    )
}

#[test]
fn head_on_plane_depth() {
    let world = plane_world(2.0);
    let cam = Camera::default();
    let scan = render_depth(&world, &Pose::identity(), &cam);
    assert_eq!(scan.len(), cam.width * cam.height);
    let center = scan
        .points
        .iter()
        .min_by(|a, b| (a.x.abs() + a.y.abs()).total_cmp(&(b.x.abs() + b.y.abs())))
        .unwrap();
    assert!((center.z - 2.0).abs() < 1e-5);
    for p in &scan.points {
        assert!(p.norm() <= cam.max_range);
    }
}

#[test]
fn empty_half_space_gives_empty_scan() {
    let world = plane_world(2.0);
    // Looking away from the plane.
    let pose = Pose::from_parts(
        nalgebra::Translation3::identity(),
        nalgebra::UnitQuaternion::from_axis_angle(&nalgebra::Vector3::x_axis(), std::f64::consts::PI),
    );
    assert!(render_depth(&world, &pose, &Camera::default()).is_empty());
}

#[test]
fn rendered_points_lie_on_the_surface() {
    let world = World::default_world();
    let poses = sample_viewpoints(&world, 4, 1.0, 11).unwrap();
    let cam = Camera::default();
    for pose in &poses {
        let scan = render_depth(&world, pose, &cam);
        assert!(!scan.is_empty());
        for p in &scan.points {
            let w = pose * nalgebra::Point3::from(*p);
            assert!(world.sdf(&w.coords).abs() < 1e-4);
            assert!(p.norm() <= cam.max_range + 1e-9);
        }
    }
}

#[test]
fn viewpoints_respect_clearance_and_seed() {
    let world = World::default_world();
    let a = sample_viewpoints(&world, 50, 1.0, 5).unwrap();
    let b = sample_viewpoints(&world, 50, 1.0, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_viewpoints(&world, 50, 1.0, 6).unwrap());
    for p in &a {
        let t = p.translation.vector;
        assert!(world.sdf(&t) >= 1.0);
        assert!(world.bounds.contains(&t));
        assert!((p.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
    }
    let empty = World::new(world.bounds, vec![]);
    assert_eq!(sample_viewpoints(&empty, 3, 0.0, 1).unwrap().len(), 3);
    assert!(sample_viewpoints(&world, 1, 100.0, 1).is_err());
}

#[test]
fn ground_truth_matches_world_sdf() {
    let world = World::default_world();
    let v = 0.2;
    let d_max = 2.0;
    let gt = ground_truth_esdf(&world, v, 16, d_max);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let g = GlobalVoxelIndex::new(rng.random_range(-25..25), rng.random_range(-25..25), rng.random_range(0..50));
        let e = gt.voxel(g).unwrap();
        assert!(e.observed);
        assert_eq!(e.distance, world.sdf(&g.center(v)).clamp(-d_max, d_max) as f32);
    }
}

#[test]
fn world_file_round_trip() {
    let world = World::default_world();
    let text = world.to_string();
    let back = World::parse(&text).unwrap();
    assert_eq!(back, world);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.world");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(World::load(&path).unwrap(), world);
    let err = World::parse("bounds 0 0 0 1 1 1\nsphere 0 0 0 -1\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn reconstruction_from_rendered_scans_is_accurate() {
    let world = World::default_world();
    let v = 0.1;
    let scans = render_scans(&world, &Camera::default(), 10, 1.0, 3).unwrap();
    let cfg = TsdfConfig::for_voxel_size(v);
    let ti = TsdfIntegrator::new(cfg.clone()).unwrap();
    let mut layer = Layer::new(v, 16);
    for s in &scans {
        ti.integrate(&mut layer, s);
    }
    let stats = surface_error(&layer, &world.sample_surface(0.1), cfg.truncation);
    assert!(stats.count > 1000);
    assert!(stats.rms < v, "{stats:?}");
}

#[test]
fn sim_bench_reports_every_variant() {
    let world = World::default_world();
    let scans = render_scans(&world, &Camera::default(), 5, 1.0, 9).unwrap();
    let mut cfg = SimBenchConfig::new(0.2);
    cfg.incremental = true;
    cfg.check_invariants = true;
    let report = run_sim_bench(&world, &scans, &cfg).unwrap();
    assert_eq!(report.variants.len(), 5);
    for var in &report.variants {
        assert_eq!(var.invariant_violations, 0, "{}", var.name);
        assert!(var.error.count > 0);
        assert!(var.error.unknown_fraction > 0.0 && var.error.unknown_fraction < 1.0);
    }
    let mut csv = Vec::new();
    report.write_csv_rows(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.split(',').count() == sdfmap::analysis::bench::SimBenchReport::CSV_HEADER.split(',').count()));
}
