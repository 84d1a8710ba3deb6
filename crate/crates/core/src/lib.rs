// SPDX-License-Identifier: Apache-2.0

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptive;
pub mod bloch;
pub mod design;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod forward;
pub mod measurement;
