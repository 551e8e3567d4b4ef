//! Exact minimum-cost virtual network embedding on tree substrates.

pub mod bench;
pub mod dp;
pub mod format;
pub mod generators;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod quantity;
pub mod transform;
pub mod tree;
pub mod validation;

pub use dp::{solve, solve_within, SolveError, SolveOptions, Storage};
pub use model::{
    Instance, Mapping, ModelError, Outcome, Request, RequestEdge, RequestNode, SolveResult,
    SolveStats, Status, Substrate, SubstrateEdge, SubstrateNode,
};
pub use oracle::{brute_force, OracleError};
pub use quantity::{Cost, Quantity, QuantityError, ResourceVec};
pub use validation::{
    check_feasible, is_feasible, mapping_cost, ValidationReport, Violation, ViolationKind,
};
