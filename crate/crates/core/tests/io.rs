use ply_rs::ply::Encoding;
use sdfmap::io::{
    read_ply_points, read_tum_trajectory, save_mesh_ply, write_mesh_ply, write_ply_points, write_tum_trajectory,
    PointCloud,
};
use sdfmap::mesh::extract_mesh;
use sdfmap::{GlobalVoxelIndex, Layer, Point3, Pose, TsdfVoxel};

#[test]
fn point_cloud_round_trip() {
    let points: Vec<Point3> = (0..50).map(|i| Point3::new(i as f64 * 0.1, -0.3 * i as f64, 1.0 / (i + 1) as f64)).collect();
    let colors: Vec<[u8; 3]> = (0..50).map(|i| [i as u8, 255 - i as u8, 7]).collect();
    for encoding in [Encoding::Ascii, Encoding::BinaryLittleEndian] {
        for with_colors in [false, true] {
            let cloud = PointCloud {
                points: points.clone(),
                colors: with_colors.then(|| colors.clone()),
            };
            let mut buf = Vec::new();
            write_ply_points(&mut buf, &cloud, encoding).unwrap();
            let back = read_ply_points(&mut buf.as_slice()).unwrap();
            assert_eq!(back, cloud, "{encoding:?} colors {with_colors}");
        }
    }
}

#[test]
fn reads_float_vertices_from_foreign_files() {
    let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n0.5 -1 4\n";
    let cloud = read_ply_points(&mut text.as_bytes()).unwrap();
    assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(0.5, -1.0, 4.0)]);
    assert!(cloud.colors.is_none());
    assert!(read_ply_points(&mut "not a ply".as_bytes()).is_err());
}

#[test]
fn mesh_ply_is_binary_and_parseable() {
    let v = 0.1;
    let mut layer: Layer<TsdfVoxel> = Layer::new(v, 8);
    for x in -5..5 {
        for y in -5..5 {
            for z in -5..5 {
                let g = GlobalVoxelIndex::new(x, y, z);
                let t = layer.voxel_mut_or_allocate(g);
                t.distance = (g.center(v).norm() - 0.3) as f32;
                t.weight = 1.0;
            }
        }
    }
    let blocks: Vec<_> = layer.block_indices().collect();
    let mesh = extract_mesh(&layer, &blocks, false);
    let mut buf = Vec::new();
    write_mesh_ply(&mut buf, &mesh).unwrap();
    let header_end = buf.windows(11).position(|w| w == b"end_header\n").unwrap();
    let header = std::str::from_utf8(&buf[..header_end]).unwrap();
    assert!(header.contains("format binary_little_endian 1.0"));
    assert!(header.contains(&format!("element vertex {}", mesh.num_vertices())));
    assert!(header.contains(&format!("element face {}", mesh.num_triangles())));
    for prop in ["x", "y", "z", "nx", "ny", "nz"] {
        assert!(header.contains(&format!("property float {prop}\n")));
    }
    assert!(header.contains("property list uchar uint vertex_indices"));
    let body = buf.len() - header_end - 11;
    assert_eq!(body, mesh.num_vertices() * 24 + mesh.num_triangles() * 13);

    let parser = ply_rs::parser::Parser::<ply_rs::ply::DefaultElement>::new();
    let ply = parser.read_ply(&mut buf.as_slice()).unwrap();
    assert_eq!(ply.payload["vertex"].len(), mesh.num_vertices());
    assert_eq!(ply.payload["face"].len(), mesh.num_triangles());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ply");
    save_mesh_ply(&path, &mesh).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), buf);
}

#[test]
fn tum_round_trip_and_errors() {
    let poses: Vec<(f64, Pose)> = (0..5)
        .map(|i| {
            let r = nalgebra::UnitQuaternion::from_euler_angles(0.1 * i as f64, -0.2, 0.3 * i as f64);
            (i as f64 * 0.5, Pose::from_parts(nalgebra::Translation3::new(i as f64, 2.0, -1.0), r))
        })
        .collect();
    let mut buf = Vec::new();
    write_tum_trajectory(&mut buf, &poses).unwrap();
    let back = read_tum_trajectory(buf.as_slice()).unwrap();
    assert_eq!(back.len(), poses.len());
    for ((t0, p0), (t1, p1)) in poses.iter().zip(&back) {
        assert_eq!(t0, t1);
        assert!((p0.translation.vector - p1.translation.vector).norm() < 1e-12);
        assert!(p0.rotation.angle_to(&p1.rotation) < 1e-9);
    }
    // qx qy qz qw order: a 90° turn about z.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let one = read_tum_trajectory(format!("0 1 2 3 0 0 {s} {s}\n").as_bytes()).unwrap();
    let x = one[0].1.rotation * nalgebra::Vector3::x();
    assert!((x - nalgebra::Vector3::y()).norm() < 1e-12);
    let err = read_tum_trajectory("# c\n0 1 2 3 0 0 0 1\n0 1 2\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

