//! Dense tensors and reverse-mode automatic differentiation.
//!
//! [`Tensor`] is a plain row-major value. A [`Graph`] records operations on
//! [`Var`] handles during a forward pass and differentiates a scalar root
//! once with [`Graph::backward`].
//!
//! ```
//! use csi_har::tensor::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.param(Tensor::new(&[3], vec![1.0, 2.0, 3.0])?);
//! let loss = x.mul(x)?.sum()?;
//! let grads = g.backward(loss)?;
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
//! # Ok::<(), csi_har::Error>(())
//! ```

mod element;
mod gradcheck;
mod graph;
mod value;

pub use element::Element;
pub use gradcheck::{grad_check, grad_check_many, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use graph::{softmax_rows, Gradients, Graph, Padding, Var};
pub use value::Tensor;
