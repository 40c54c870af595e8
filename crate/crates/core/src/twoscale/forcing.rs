use crate::mesh::Point;

/// Extra source terms added to the model, used by manufactured solutions.
///
/// The macroscopic source enters the right-hand side of the pressure equation. The
/// microscopic sources enter the cell problem at every macroscopic node: a volume source,
/// an additive term in the Robin flux on Γ_R and a Neumann flux on Γ_N.
pub trait Forcing: Sync + Send {
    fn macro_source(&self, _t: f64, _x: Point) -> f64 {
        0.0
    }

    fn micro_source(&self, _t: f64, _x: Point, _y: Point) -> f64 {
        0.0
    }

    fn robin_source(&self, _t: f64, _x: Point, _y: Point) -> f64 {
        0.0
    }

    fn neumann_source(&self, _t: f64, _x: Point, _y: Point) -> f64 {
        0.0
    }

    fn has_macro_source(&self) -> bool {
        false
    }

    fn has_micro_source(&self) -> bool {
        false
    }
}

/// The unforced model.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {}
