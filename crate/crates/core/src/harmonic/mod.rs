//! Harmonic extensions on B⁴ (the Poisson extension and the closed forms
//! `h_p`, `h_{λ,p}`), the linear boundary solve for `A̲₀` and the small
//! solution `A̲_ε`.

pub mod boundary;
pub mod closed;
pub mod d0;
pub mod poisson;
pub mod poly;

pub use boundary::{BoundaryFamily, BoundaryForm, LinearTerm, QuadraticTerm};
pub use closed::{check_h_scaling, h_deviation, h_lambda_p_boundary, h_p_boundary, HLambdaP, HpField};
pub use d0::{
    l21_norm, small_solution_cached, small_solution_picard, solve_d0, solve_d0_cached, D0Grid, D0Residuals, D0Solution,
    GalerkinSpace, PicardConfig, SmallSolution,
};
pub use poisson::{laplacian_residual, poisson_extend, HarmonicField, PoissonExtension};
pub use poly::{PolyCurl, PolyForm1};
