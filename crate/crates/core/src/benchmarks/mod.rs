//! The benchmark problems: scalar families with closed-form costs, PD tuning
//! on an analytic damped string, and fixed-order observer design.

pub mod observer;
pub mod random;
pub mod scalar;
pub mod wave;

pub use observer::{
    build_observer_problem, diffusion_plant, initialize_observer, kalman_gain, modal_surrogate, DiffusionPlantSpec,
    Initialization, ObserverOptions, ObserverPlant, ObserverProblem, PlantSource,
};
pub use wave::{
    phi_eval, phi_eval_with, wave_fd_closed_loop, wave_fd_discretize, wave_fd_discretize_with, WaveEquationProblem,
};
