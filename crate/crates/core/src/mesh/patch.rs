use super::SimplicialMesh;

/// Element patches around cells, facets and vertices.
#[derive(Debug, Clone)]
pub struct PatchIndex {
    /// Per cell: itself and every cell sharing a facet with it (sorted).
    pub omega_b: Vec<Vec<usize>>,
    /// Per cell: itself and every cell sharing a vertex with it (sorted).
    pub omega_tilde_b: Vec<Vec<usize>>,
    /// Per facet: incident cells.
    pub omega_e: Vec<Vec<usize>>,
    /// Per vertex: incident cells.
    pub omega_x: Vec<Vec<usize>>,
    /// Per vertex: total measure of `omega_x`.
    pub omega_x_measure: Vec<f64>,
}

impl PatchIndex {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let mut omega_x = vec![Vec::new(); mesh.n_vertices()];
        for c in 0..mesh.n_cells() {
            for &v in mesh.cell(c) {
                omega_x[v].push(c);
            }
        }
        let omega_x_measure = omega_x
            .iter()
            .map(|cs: &Vec<usize>| cs.iter().map(|&c| mesh.measure(c)).sum())
            .collect();
        let omega_e: Vec<Vec<usize>> = mesh.edges().iter().map(|e| e.cells().to_vec()).collect();

        let mut omega_b = Vec::with_capacity(mesh.n_cells());
        let mut omega_tilde_b = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let mut by_edge: Vec<usize> = mesh
                .cell_edges(c)
                .iter()
                .flat_map(|&e| omega_e[e].iter().copied())
                .collect();
            by_edge.push(c);
            by_edge.sort_unstable();
            by_edge.dedup();
            omega_b.push(by_edge);

            let mut by_vertex: Vec<usize> = mesh.cell(c).iter().flat_map(|&v| omega_x[v].iter().copied()).collect();
            by_vertex.sort_unstable();
            by_vertex.dedup();
            omega_tilde_b.push(by_vertex);
        }
        Self {
            omega_b,
            omega_tilde_b,
            omega_e,
            omega_x,
            omega_x_measure,
        }
    }
}

impl SimplicialMesh {
    pub fn patch_index(&self) -> PatchIndex {
        PatchIndex::new(self)
    }
}
