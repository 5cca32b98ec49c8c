pub mod detect;
pub mod eval;
pub mod fht;
pub mod rectify;
pub mod synth;
pub mod train;

pub use detect::{cmd_detect_vp, Detector, Method, VpReport};
pub use eval::{cmd_eval, EvalSource, MetricsReport};
pub use fht::cmd_fht;
pub use rectify::{cmd_rectify, parse_vp, RectifyReport, VpSource};
pub use synth::cmd_synth;
pub use train::{cmd_train, TrainReport};
