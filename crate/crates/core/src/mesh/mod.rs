//! Marching-cubes extraction of the TSDF zero isosurface.
//!
//! Cubes are formed by 8 neighboring voxel centers. The cube whose lowest
//! corner is voxel `g` belongs to the block containing `g`, so a block's
//! geometry also depends on its upper neighbors. The output is a triangle
//! soup: every triangle owns its three vertices.

pub mod tables;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::index::{split_global_index, BlockIndex, GlobalVoxelIndex};
use crate::layer::{Layer, UpdateConsumer};
use crate::tsdf::TsdfVoxel;
use crate::Point3;
use tables::{triangle_table, CORNERS, EDGES};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    /// Unit normal per vertex.
    pub normals: Vec<Point3>,
    /// Per-vertex colors; either empty or parallel to `vertices`.
    pub colors: Vec<[u8; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn has_colors(&self) -> bool {
        !self.colors.is_empty()
    }

    /// Append `other`, offsetting its indices. Colors are kept only if both
    /// meshes carry them (an empty mesh adopts the other's choice).
    pub fn append(&mut self, other: &Mesh) {
        let keep_colors = if self.vertices.is_empty() {
            other.has_colors()
        } else {
            self.has_colors() && other.has_colors()
        };
        if !keep_colors {
            self.colors.clear();
        }
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.normals.extend_from_slice(&other.normals);
        if keep_colors {
            self.colors.extend_from_slice(&other.colors);
        }
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }

    /// Merge vertices with bitwise-identical positions. Optional post-pass;
    /// the extractor itself always produces a soup.
    pub fn weld(&self) -> Mesh {
        let mut out = Mesh::new();
        let colored = self.has_colors();
        let mut map: FxHashMap<[u64; 3], u32> = FxHashMap::default();
        let mut normal_sums: Vec<Point3> = Vec::new();
        let remap: Vec<u32> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                let idx = *map.entry(key).or_insert_with(|| {
                    out.vertices.push(*p);
                    normal_sums.push(Point3::zeros());
                    if colored {
                        out.colors.push(self.colors[i]);
                    }
                    (out.vertices.len() - 1) as u32
                });
                normal_sums[idx as usize] += self.normals[i];
                idx
            })
            .collect();
        out.normals = normal_sums
            .into_iter()
            .map(|n| n.try_normalize(0.0).unwrap_or_else(Point3::z))
            .collect();
        out.triangles = self
            .triangles
            .iter()
            .map(|t| t.map(|i| remap[i as usize]))
            .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
            .collect();
        out
    }
}

/// Corner values of one cube, or `None` if any corner is unknown.
fn cube_corners(
    layer: &Layer<TsdfVoxel>,
    base: GlobalVoxelIndex,
) -> Option<[(GlobalVoxelIndex, TsdfVoxel); 8]> {
    let vps = layer.voxels_per_side();
    let mut out = [(base, TsdfVoxel::default()); 8];
    let (b0, _) = split_global_index(base, vps);
    let mut cached = layer.block(b0);
    let mut cached_idx = b0;
    for (k, c) in CORNERS.iter().enumerate() {
        let g = base.offset([c[0] as i64, c[1] as i64, c[2] as i64]);
        let (b, l) = split_global_index(g, vps);
        if b != cached_idx {
            cached = layer.block(b);
            cached_idx = b;
        }
        let vox = *cached?.voxel(l);
        if !vox.observed() {
            return None;
        }
        out[k] = (g, vox);
    }
    Some(out)
}

fn gradient(layer: &Layer<TsdfVoxel>, p: &Point3) -> Option<Point3> {
    let h = layer.voxel_size();
    let mut g = Point3::zeros();
    for axis in 0..3 {
        let mut e = Point3::zeros();
        e[axis] = h;
        let hi = layer.interpolate_distance(&(p + e))?;
        let lo = layer.interpolate_distance(&(p - e))?;
        g[axis] = (hi - lo) / (2.0 * h);
    }
    g.try_normalize(1e-12)
}

/// Mesh of the cubes anchored in one block.
pub fn extract_block(layer: &Layer<TsdfVoxel>, block: BlockIndex, with_colors: bool) -> Mesh {
    let mut mesh = Mesh::new();
    let Some(b) = layer.block(block) else {
        return mesh;
    };
    let v = layer.voxel_size();
    let table = triangle_table();
    for i in 0..b.voxels().len() {
        if !b.voxels()[i].observed() {
            continue;
        }
        let base = b.global_index(i);
        let Some(corners) = cube_corners(layer, base) else {
            continue;
        };
        let mut case = 0usize;
        for (k, (_, vox)) in corners.iter().enumerate() {
            if vox.distance < 0.0 {
                case |= 1 << k;
            }
        }
        let tris = &table[case];
        if tris.is_empty() {
            continue;
        }
        let mut edge_vertex: [Option<(Point3, [u8; 3])>; 12] = [None; 12];
        for t in tris {
            for &e in t {
                let e = e as usize;
                if edge_vertex[e].is_none() {
                    let [ia, ib] = EDGES[e];
                    let (ga, va) = corners[ia];
                    let (gb, vb) = corners[ib];
                    let (da, db) = (va.distance as f64, vb.distance as f64);
                    let s = da / (da - db);
                    let pa = ga.center(v);
                    let pb = gb.center(v);
                    let p = pa + (pb - pa) * s;
                    let c = std::array::from_fn(|k| {
                        let ca = va.color[k] as f64;
                        let cb = vb.color[k] as f64;
                        (ca + (cb - ca) * s).round().clamp(0.0, 255.0) as u8
                    });
                    edge_vertex[e] = Some((p, c));
                }
            }
            let verts = t.map(|e| edge_vertex[e as usize].unwrap());
            let face = (verts[1].0 - verts[0].0).cross(&(verts[2].0 - verts[0].0));
            let face_n = face.try_normalize(0.0).unwrap_or_else(Point3::z);
            let base_idx = mesh.vertices.len() as u32;
            for (p, c) in verts {
                mesh.vertices.push(p);
                mesh.normals.push(gradient(layer, &p).unwrap_or(face_n));
                if with_colors {
                    mesh.colors.push(c);
                }
            }
            mesh.triangles.push([base_idx, base_idx + 1, base_idx + 2]);
        }
    }
    mesh
}

/// Mesh of the given blocks, concatenated in the order given. Blocks are
/// processed in parallel; the result does not depend on thread scheduling.
pub fn extract_mesh(layer: &Layer<TsdfVoxel>, blocks: &[BlockIndex], with_colors: bool) -> Mesh {
    let parts: Vec<Mesh> = blocks
        .par_iter()
        .map(|b| extract_block(layer, *b, with_colors))
        .collect();
    let mut mesh = Mesh::new();
    for p in &parts {
        mesh.append(p);
    }
    mesh
}

/// Keeps one mesh fragment per block and refreshes fragments whose input
/// voxels changed.
#[derive(Debug, Clone, Default)]
pub struct MeshIntegrator {
    fragments: FxHashMap<BlockIndex, Mesh>,
    with_colors: bool,
}

impl MeshIntegrator {
    pub fn new(with_colors: bool) -> Self {
        Self {
            fragments: FxHashMap::default(),
            with_colors,
        }
    }

    /// Drain the layer's mesh update set and re-extract every block whose
    /// cubes read an updated block. Returns the number of blocks extracted.
    pub fn update(&mut self, layer: &mut Layer<TsdfVoxel>) -> usize {
        let updated = layer.drain_updated(UpdateConsumer::Mesh);
        let mut affected: Vec<BlockIndex> = updated
            .iter()
            .flat_map(|b| {
                (0..8).map(move |k| b.offset([-(k & 1), -((k >> 1) & 1), -((k >> 2) & 1)]))
            })
            .filter(|b| layer.has_block(*b))
            .collect();
        affected.sort();
        affected.dedup();
        self.refresh(layer, &affected);
        affected.len()
    }

    /// Re-extract all blocks of the layer.
    pub fn extract_all(&mut self, layer: &Layer<TsdfVoxel>) -> usize {
        let mut all: Vec<BlockIndex> = layer.block_indices().collect();
        all.sort();
        self.fragments.clear();
        self.refresh(layer, &all);
        all.len()
    }

    fn refresh(&mut self, layer: &Layer<TsdfVoxel>, blocks: &[BlockIndex]) {
        let with_colors = self.with_colors;
        let parts: Vec<(BlockIndex, Mesh)> = blocks
            .par_iter()
            .map(|b| (*b, extract_block(layer, *b, with_colors)))
            .collect();
        for (b, m) in parts {
            if m.is_empty() {
                self.fragments.remove(&b);
            } else {
                self.fragments.insert(b, m);
            }
        }
    }

    pub fn fragment(&self, block: BlockIndex) -> Option<&Mesh> {
        self.fragments.get(&block)
    }

    pub fn num_fragments(&self) -> usize {
        self.fragments.len()
    }

    /// All fragments concatenated in block-index order.
    pub fn mesh(&self) -> Mesh {
        let mut keys: Vec<_> = self.fragments.keys().copied().collect();
        keys.sort();
        let mut mesh = Mesh::new();
        for k in keys {
            mesh.append(&self.fragments[&k]);
        }
        mesh
    }
}
