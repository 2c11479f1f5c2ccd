//! Pure algorithmic core of the attribute-editing robustness benchmark:
//! synthetic scenes, diffusion sampling and inversion, mask-guided
//! appearance editing, geometry editing, noise filtering and robustness
//! metrics. Everything here is `no_std` + `alloc`; file formats, the CLI
//! and network adapters live in the `segbench` crate.
#![no_std]
extern crate alloc;

pub mod appearance;
pub mod autodiff;
pub mod bench;
pub mod diffusion;
pub mod error;
pub mod filtering;
pub mod geometry;
pub mod prompt;
pub mod scenes;
pub mod tensor;

pub use error::{Error, Result};
