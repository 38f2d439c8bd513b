// Copyright 2026 The hfcalc authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Error classes and their process exit codes.

use std::fmt;

use hfcalc_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Config(anyhow::Error),
    /// Exit code 3.
    Input(anyhow::Error),
    /// Exit code 4.
    Compute(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Compute(_) => 4,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(anyhow::anyhow!("{msg}"))
    }

    /// Sorts a core error into a class and prefixes `context`.
    pub fn from_core(err: CoreError, context: impl fmt::Display) -> Self {
        let class: fn(anyhow::Error) -> CliError = match &err {
            CoreError::MalformedGrid(_)
            | CoreError::BadGeometry(_)
            | CoreError::MissingSpinBlock
            | CoreError::BadContactTable(_)
            | CoreError::BadDataset(_)
            | CoreError::BadRecipe(_)
            | CoreError::BadConstants(_)
            | CoreError::BadTable(_)
            | CoreError::Csv(_)
            | CoreError::Io(_) => CliError::Input,
            CoreError::BadDefectSpec(_)
            | CoreError::BadAxis(_)
            | CoreError::MissingExclusionRadius(_)
            | CoreError::BadResolution(_) => CliError::Config,
            CoreError::OutOfDomain { .. }
            | CoreError::DuplicateSite { .. }
            | CoreError::SingularKernel { .. }
            | CoreError::ResourceLimit { .. }
            | CoreError::InconsistentInput(_) => CliError::Compute,
        };
        class(anyhow::Error::new(err).context(context.to_string()))
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            CliError::Config(e) | CliError::Input(e) | CliError::Compute(e) => e,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.inner())
    }
}

impl std::error::Error for CliError {}

/// Attaches a context and a class to core results.
pub trait CoreContext<T> {
    fn ctx(self, context: impl fmt::Display) -> CliResult<T>;
}

impl<T> CoreContext<T> for Result<T, CoreError> {
    fn ctx(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(e, context))
    }
}
