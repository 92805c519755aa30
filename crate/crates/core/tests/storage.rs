use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdfmap::index::{global_index_from_point, join_global_index, split_global_index};
use sdfmap::serialize::{deserialize_layer, read_header, serialize_layer};
use sdfmap::{BlockIndex, Error, EsdfVoxel, GlobalVoxelIndex, Layer, LayerKind, Point3, TsdfVoxel};

fn random_tsdf(rng: &mut ChaCha8Rng, blocks: usize, vps: usize) -> Layer<TsdfVoxel> {
    let mut layer = Layer::new(rng.random_range(0.01..1.0), vps);
    for _ in 0..blocks {
        let b = BlockIndex::new(rng.random_range(-50..50), rng.random_range(-50..50), rng.random_range(-50..50));
        for t in layer.get_or_allocate_block(b).voxels_mut() {
            *t = TsdfVoxel {
                distance: f32::from_bits(rng.random::<u32>() & 0xbfff_ffff),
                weight: rng.random(),
                color: rng.random(),
            };
        }
    }
    layer
}

fn random_esdf(rng: &mut ChaCha8Rng, blocks: usize, vps: usize) -> Layer<EsdfVoxel> {
    let mut layer = Layer::with_fill(0.1, vps, EsdfVoxel::unobserved(3.0));
    for _ in 0..blocks {
        let b = BlockIndex::new(rng.random_range(-9..9), rng.random_range(-9..9), rng.random_range(-9..9));
        for e in layer.get_or_allocate_block(b).voxels_mut() {
            *e = EsdfVoxel {
                distance: rng.random_range(-3.0..3.0),
                observed: rng.random(),
                fixed: rng.random(),
                in_raise: rng.random(),
                in_lower: rng.random(),
                parent: rng.random::<[i8; 3]>(),
            };
        }
    }
    layer
}

fn payload_bits<V: sdfmap::Voxel>(layer: &Layer<V>) -> Vec<(BlockIndex, Vec<u8>)> {
    let mut out: Vec<_> = layer
        .blocks()
        .iter()
        .map(|b| {
            let mut bytes = Vec::new();
            for v in b.voxels() {
                v.encode(&mut bytes);
            }
            (b.index(), bytes)
        })
        .collect();
    out.sort_by_key(|(b, _)| *b);
    out
}

#[test]
fn tsdf_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for blocks in [0, 1, 3, 17] {
        let layer = random_tsdf(&mut rng, blocks, 8);
        let mut buf = Vec::new();
        serialize_layer(&layer, &mut buf).unwrap();
        let back: Layer<TsdfVoxel> = deserialize_layer(&mut buf.as_slice()).unwrap();
        assert_eq!(back.voxel_size().to_bits(), layer.voxel_size().to_bits());
        assert_eq!(back.voxels_per_side(), layer.voxels_per_side());
        assert_eq!(payload_bits(&back), payload_bits(&layer));
    }
}

#[test]
fn esdf_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layer = random_esdf(&mut rng, 5, 4);
    let mut buf = Vec::new();
    serialize_layer(&layer, &mut buf).unwrap();
    let header = read_header(&mut buf.as_slice()).unwrap();
    assert_eq!(header.kind, LayerKind::Esdf);
    let back: Layer<EsdfVoxel> = deserialize_layer(&mut buf.as_slice()).unwrap();
    assert_eq!(payload_bits(&back), payload_bits(&layer));
}

#[test]
fn header_layout() {
    let layer: Layer<TsdfVoxel> = Layer::new(0.25, 16);
    let mut buf = Vec::new();
    serialize_layer(&layer, &mut buf).unwrap();
    assert_eq!(&buf[..6], b"VXBLX\0");
    assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 1);
    assert_eq!(f64::from_le_bytes(buf[10..18].try_into().unwrap()), 0.25);
    assert_eq!(u32::from_le_bytes(buf[18..22].try_into().unwrap()), 16);
    assert_eq!(buf[22], 0);
    assert_eq!(u64::from_le_bytes(buf[23..31].try_into().unwrap()), 0);
    assert_eq!(buf.len(), 31);
}

#[test]
fn corrupt_and_truncated_inputs_are_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layer = random_tsdf(&mut rng, 2, 4);
    let mut buf = Vec::new();
    serialize_layer(&layer, &mut buf).unwrap();

    let mut bad = buf.clone();
    bad[0] = b'Z';
    assert!(matches!(deserialize_layer::<TsdfVoxel, _>(&mut bad.as_slice()), Err(Error::Format(_))));

    let mut bad = buf.clone();
    bad[6] = 9;
    assert!(matches!(deserialize_layer::<TsdfVoxel, _>(&mut bad.as_slice()), Err(Error::Format(_))));

    for cut in [3, 20, 40, buf.len() - 1] {
        let r = deserialize_layer::<TsdfVoxel, _>(&mut &buf[..cut]);
        assert!(r.is_err(), "cut at {cut}");
    }
    assert!(matches!(
        deserialize_layer::<TsdfVoxel, _>(&mut &buf[..buf.len() - 1]),
        Err(Error::Truncated { .. })
    ));
    assert!(matches!(
        deserialize_layer::<EsdfVoxel, _>(&mut buf.as_slice()),
        Err(Error::WrongLayerKind { .. })
    ));
}

#[test]
fn index_examples() {
    let v = 0.1;
    assert_eq!(global_index_from_point(&Point3::zeros(), v), GlobalVoxelIndex::new(0, 0, 0));
    assert_eq!(global_index_from_point(&Point3::new(0.25, -0.05, 0.10), v), GlobalVoxelIndex::new(2, -1, 1));
    assert_eq!(global_index_from_point(&Point3::new(0.0999, 0.0999, 0.0999), v), GlobalVoxelIndex::new(0, 0, 0));
    let (b, l) = split_global_index(GlobalVoxelIndex::new(17, -1, 0), 16);
    assert_eq!((b.x, b.y, b.z), (1, -1, 0));
    assert_eq!((l.x, l.y, l.z), (1, 15, 0));
    let (b, l) = split_global_index(GlobalVoxelIndex::new(-16, -17, 15), 16);
    assert_eq!((b.x, b.y, b.z), (-1, -2, 0));
    assert_eq!((l.x, l.y, l.z), (0, 15, 15));
}

#[test]
fn lookup_and_allocation() {
    let mut layer: Layer<EsdfVoxel> = Layer::with_fill(0.1, 8, EsdfVoxel::unobserved(2.5));
    let g = GlobalVoxelIndex::new(3, -4, 9);
    assert!(layer.voxel(g).is_none());
    let b = split_global_index(g, 8).0;
    layer.get_or_allocate_block(b);
    layer.get_or_allocate_block(b);
    assert_eq!(layer.num_blocks(), 1);
    let e = layer.voxel(g).unwrap();
    assert_eq!(e.distance, 2.5);
    assert!(!e.observed);
    assert!(layer.updated_blocks(sdfmap::UpdateConsumer::Esdf).contains(&b));
    let mut tsdf: Layer<TsdfVoxel> = Layer::new(0.1, 8);
    tsdf.get_or_allocate_block(b);
    assert_eq!(tsdf.voxel(g).unwrap().weight, 0.0);
}

fn affine_layer(a: Point3, c: f64, v: f64) -> Layer<TsdfVoxel> {
    let mut layer: Layer<TsdfVoxel> = Layer::new(v, 4);
    for x in -6..6 {
        for y in -6..6 {
            for z in -6..6 {
                let g = GlobalVoxelIndex::new(x, y, z);
                let t = layer.voxel_mut_or_allocate(g);
                t.distance = (a.dot(&g.center(v)) + c) as f32;
                t.weight = 1.0;
            }
        }
    }
    layer
}

#[test]
fn interpolation_examples() {
    let v = 0.1;
    let layer = affine_layer(Point3::new(1.0, 0.0, 0.0), 0.0, v);
    // Midway between centers 0.05 and 0.15.
    let d = layer.interpolate_distance(&Point3::new(0.1, 0.05, 0.05)).unwrap();
    assert!((d - 0.1).abs() < 1e-7);
    let g = GlobalVoxelIndex::new(2, -3, 1);
    let at = layer.interpolate_distance(&g.center(v)).unwrap();
    assert_eq!(at, layer.voxel(g).unwrap().distance as f64);
    // Outside the allocated region the value is unknown.
    assert!(layer.interpolate_distance(&Point3::new(0.58, 0.0, 0.0)).is_none());
    let constant = affine_layer(Point3::zeros(), 0.125, v);
    assert_eq!(constant.interpolate_distance(&Point3::new(0.013, -0.2, 0.31)), Some(0.125));
}

proptest! {
    #[test]
    fn voxel_center_within_half_voxel(x in -1e3..1e3f64, y in -1e3..1e3f64, z in -1e3..1e3f64, v in 0.01..2.0f64) {
        let p = Point3::new(x, y, z);
        let c = global_index_from_point(&p, v).center(v);
        prop_assert!((c - p).amax() <= v / 2.0 + 1e-9 * (1.0 + p.amax()));
    }

    #[test]
    fn split_join_identity(x in -100_000i64..100_000, y in -100_000i64..100_000, z in -100_000i64..100_000, vps in 1usize..33) {
        let g = GlobalVoxelIndex::new(x, y, z);
        let (b, l) = split_global_index(g, vps);
        prop_assert!(l.x < vps && l.y < vps && l.z < vps);
        prop_assert_eq!(join_global_index(b, l, vps), g);
    }

    #[test]
    fn trilinear_reproduces_affine_fields(
        a in prop::array::uniform3(-1.0..1.0f64),
        c in -0.5..0.5f64,
        q in prop::array::uniform3(-0.5..0.5f64),
    ) {
        let a = Point3::from(a);
        let layer = affine_layer(a, c, 0.1);
        let p = Point3::from(q);
        let d = layer.interpolate_distance(&p).unwrap();
        prop_assert!((d - (a.dot(&p) + c)).abs() < 1e-6);
    }

    #[test]
    fn random_layers_round_trip(seed in any::<u64>(), blocks in 0usize..6, vps in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = random_tsdf(&mut rng, blocks, vps);
        let mut buf = Vec::new();
        serialize_layer(&layer, &mut buf).unwrap();
        let back: Layer<TsdfVoxel> = deserialize_layer(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(payload_bits(&back), payload_bits(&layer));
    }
}
