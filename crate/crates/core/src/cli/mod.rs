//! Config-driven experiment runner and plotting used by the `gail-lin` binary.

mod config;
mod experiment;
mod plot;

pub use config::{parse_config, AlgorithmSection, BehaviorSpec, ExperimentConfig, MdpSpec, Mode, Overrides};
pub use experiment::{run_experiment, ExperimentSummary, THREADS_ENV};
pub use plot::{read_series, render_plot, render_svg, write_series, Series};
