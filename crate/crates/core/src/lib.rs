//! Fast Hough transform based vanishing point detection for document images.
//!
//! The crate is organized bottom-up:
//!
//! * [`fht`] computes the dyadic fast Hough transform per quadrant and the
//!   joined, skewed `H12`/`H34` maps, together with an exact brute-force oracle
//!   and the transposed (adjoint) operator.
//! * [`geometry`] holds the closed-form coordinate algebra between image
//!   points, Hough points and double-Hough points.
//! * [`nn`] is a minimal layer stack (bias-free convolution, relu, FHT layer,
//!   `1 - rbf` output, L2 loss, momentum SGD) used to build HoughNet.
//! * [`vp`] turns Hough maps or network outputs into vanishing points and
//!   builds training targets.
//! * [`rectify`] builds a rectifying homography from two vanishing points and
//!   scores document quadrangles.
//! * [`synth`] generates images with exact vanishing point ground truth.

pub mod error;
pub mod fht;
pub mod geometry;
pub mod image;
pub mod nn;
pub mod rectify;
pub mod synth;
pub mod vp;

pub use error::{Error, Result};
pub use image::GrayImage;
