//! Red-green refinement.
//!
//! Marked cells are split regularly into `2^dim` children through their edge midpoints.
//! In 2D a closure pass makes the result conforming: a cell with two or more refined
//! edges is refined red as well, a cell with exactly one refined edge is bisected green.
//! Green pairs from earlier rounds are always merged back into their parent before the
//! closure runs, so green cells are never refined again and shapes do not degenerate.

use std::collections::{BTreeMap, BTreeSet};

use super::{facet_key, midpoint, FacetKey, GreenParent, Point, SimplicialMesh};

/// A cell of the coarse working mesh: either an existing non-green cell or the parent of
/// a green pair.
struct WorkCell {
    verts: [usize; 3],
    /// Old cells covering this one.
    members: Vec<usize>,
    red: bool,
    /// False once a red cell has been replaced by its children.
    alive: bool,
}

impl SimplicialMesh {
    /// Refines the marked cells; the result is conforming. Ids outside the mesh are ignored.
    pub fn refine(&self, marked: &[usize]) -> SimplicialMesh {
        self.refine_with_parents(marked).0
    }

    /// Refines every cell once.
    pub fn refine_uniform(&self) -> SimplicialMesh {
        let all: Vec<usize> = (0..self.n_cells()).collect();
        self.refine(&all)
    }

    /// Like [`refine`](Self::refine), also returning for each new cell the old cell that
    /// contains its centroid. Children of untouched or red-refined non-green cells lie
    /// entirely inside that cell.
    pub fn refine_with_parents(&self, marked: &[usize]) -> (SimplicialMesh, Vec<usize>) {
        let marked: BTreeSet<usize> = marked.iter().copied().filter(|&c| c < self.n_cells()).collect();
        if self.dim == 1 {
            self.refine_1d(&marked)
        } else {
            self.refine_2d(&marked)
        }
    }

    fn refine_1d(&self, marked: &BTreeSet<usize>) -> (SimplicialMesh, Vec<usize>) {
        let mut coords = self.coords.clone();
        let mut cells = Vec::new();
        let mut parents = Vec::new();
        for c in 0..self.n_cells() {
            let (a, b) = (self.cells[2 * c], self.cells[2 * c + 1]);
            if marked.contains(&c) {
                let m = coords.len();
                coords.push(midpoint(coords[a], coords[b]));
                cells.extend_from_slice(&[a, m, m, b]);
                parents.extend_from_slice(&[c, c]);
            } else {
                cells.extend_from_slice(&[a, b]);
                parents.push(c);
            }
        }
        let mesh = SimplicialMesh::new(1, coords, cells, &self.boundary_map())
            .expect("refining a valid 1D mesh yields a valid mesh");
        (mesh, parents)
    }

    fn refine_2d(&self, marked: &BTreeSet<usize>) -> (SimplicialMesh, Vec<usize>) {
        // Coarse working mesh: merge green pairs back into their parents.
        let mut work: Vec<WorkCell> = Vec::new();
        let mut refined: BTreeMap<FacetKey, usize> = BTreeMap::new();
        let mut parent_slot: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for c in 0..self.n_cells() {
            match self.green_parent(c) {
                Some(GreenParent { parent, midpoint }) => {
                    let slot = *parent_slot.entry(parent).or_insert_with(|| {
                        work.push(WorkCell {
                            verts: parent,
                            members: Vec::new(),
                            red: false,
                            alive: true,
                        });
                        work.len() - 1
                    });
                    work[slot].members.push(c);
                    work[slot].red |= marked.contains(&c);
                    refined.insert(green_split_edge(parent, midpoint, &self.coords), midpoint);
                }
                None => {
                    let v = self.cell(c);
                    work.push(WorkCell {
                        verts: [v[0], v[1], v[2]],
                        members: vec![c],
                        red: marked.contains(&c),
                        alive: true,
                    });
                }
            }
        }

        // Closure. Red cells are expanded into four (unmarked) children, which may in turn
        // need refinement when a neighbour split one of their edges. A cell turns red when
        // two of its edges are split, or when its single split edge was split again.
        let mut coords = self.coords.clone();
        loop {
            let mut changed = false;
            for w in 0..work.len() {
                if !(work[w].alive && work[w].red) {
                    continue;
                }
                let [a, b, c] = work[w].verts;
                let mut mid = |p: usize, q: usize| {
                    *refined.entry(facet_key(p, q)).or_insert_with(|| {
                        coords.push(midpoint(coords[p], coords[q]));
                        coords.len() - 1
                    })
                };
                let (mab, mbc, mca) = (mid(a, b), mid(b, c), mid(c, a));
                work[w].alive = false;
                let members = work[w].members.clone();
                for verts in [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]] {
                    work.push(WorkCell {
                        verts,
                        members: members.clone(),
                        red: false,
                        alive: true,
                    });
                }
                changed = true;
            }
            for w in work.iter_mut().filter(|w| w.alive && !w.red) {
                let split: Vec<FacetKey> = cell_edge_keys(w.verts)
                    .into_iter()
                    .filter(|k| refined.contains_key(k))
                    .collect();
                let twice = split.len() == 1 && {
                    let m = refined[&split[0]];
                    refined.contains_key(&facet_key(split[0][0], m)) || refined.contains_key(&facet_key(m, split[0][1]))
                };
                if split.len() >= 2 || twice {
                    w.red = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mid = |a: usize, b: usize| refined.get(&facet_key(a, b)).copied();

        let mut cells = Vec::new();
        let mut green = Vec::new();
        let mut parents = Vec::new();
        for w in work.iter().filter(|w| w.alive) {
            let [a, b, c] = w.verts;
            let rot = [[a, b, c], [b, c, a], [c, a, b]];
            let (children, is_green) = match rot.iter().find_map(|&[p, q, r]| mid(q, r).map(|m| (p, q, r, m))) {
                Some((p, q, r, m)) => (
                    vec![[p, q, m], [p, m, r]],
                    Some(GreenParent {
                        parent: w.verts,
                        midpoint: m,
                    }),
                ),
                None => (vec![w.verts], None),
            };
            for ch in children {
                cells.extend_from_slice(&ch);
                green.push(is_green);
                parents.push(self.containing_member(&w.members, centroid(&coords, ch)));
            }
        }

        let mut boundary = self.boundary_map();
        loop {
            let split: Vec<(FacetKey, usize)> = refined
                .iter()
                .filter(|(k, _)| boundary.contains_key(*k))
                .map(|(k, m)| (*k, *m))
                .collect();
            if split.is_empty() {
                break;
            }
            for (key, m) in split {
                let marker = boundary.remove(&key).unwrap();
                boundary.insert(facet_key(key[0], m), marker);
                boundary.insert(facet_key(m, key[1]), marker);
            }
        }
        let mesh = SimplicialMesh::with_green(2, coords, cells, &boundary, green)
            .expect("red-green closure yields a conforming mesh");
        (mesh, parents)
    }

    fn containing_member(&self, members: &[usize], x: Point) -> usize {
        if members.len() == 1 {
            return members[0];
        }
        members
            .iter()
            .copied()
            .max_by(|&p, &q| {
                let lp = self.barycentric(p, &x).iter().copied().fold(f64::INFINITY, f64::min);
                let lq = self.barycentric(q, &x).iter().copied().fold(f64::INFINITY, f64::min);
                lp.total_cmp(&lq)
            })
            .unwrap()
    }
}

fn cell_edge_keys(v: [usize; 3]) -> [FacetKey; 3] {
    [facet_key(v[1], v[2]), facet_key(v[2], v[0]), facet_key(v[0], v[1])]
}

/// Parent edge bisected by `mid`.
fn green_split_edge(parent: [usize; 3], mid: usize, coords: &[Point]) -> FacetKey {
    let m = coords[mid];
    cell_edge_keys(parent)
        .into_iter()
        .min_by(|k, l| {
            let dk = super::dist(midpoint(coords[k[0]], coords[k[1]]), m);
            let dl = super::dist(midpoint(coords[l[0]], coords[l[1]]), m);
            dk.total_cmp(&dl)
        })
        .unwrap()
}

fn centroid(coords: &[Point], v: [usize; 3]) -> Point {
    let s = v
        .iter()
        .fold([0.0, 0.0], |acc, &i| [acc[0] + coords[i][0], acc[1] + coords[i][1]]);
    [s[0] / 3.0, s[1] / 3.0]
}
