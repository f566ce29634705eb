// SPDX-License-Identifier: Apache-2.0

pub mod apis;
pub mod cli;
pub mod datasets;
pub mod eval;
pub mod executor;
pub mod gateway;
pub mod parser;
pub mod prompt;
pub mod table;
pub mod value;
