//! Randomized sharpness constructions: lacunary Rademacher multipliers,
//! random atom trains, lacunary test functions and the growth experiments
//! built on them.

mod growth;
mod khintchine;
mod lacunary;

pub use growth::{
    bspace_growth_experiment, fspace_growth_experiment, BGrowthConfig, ExperimentOutput, FGrowthConfig,
    MIN_FIT_POINTS,
};
pub use khintchine::{khintchine_audit, khintchine_constants, shell_sum_ratios, EXHAUSTIVE_LIMIT, MC_SIGMAS};
pub use lacunary::{
    cube_center, image_formula, lacunary_test_function, multiplier_window, random_atom_train, reproducing_window,
    reproducing_window_hat, AtomDraw, AtomSynth, LacunaryConfig, RademacherMultiplier, RandomAtomConfig,
};
