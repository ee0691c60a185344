//! Molecular species constants, loaded from a versioned key–value table.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::constants::{ATOMIC_MASS, DEBYE};
use crate::error::{Error, Result};

/// Constants defining one qubit implementation in a molecular species.
///
/// Internally `d10` is in C m, `mass` in kg and `omega_mol` in rad/s; the
/// table file holds Debye, atomic mass units and ordinary Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    pub label: String,
    /// Transition electric dipole moment, C m.
    pub d10: f64,
    /// Molecular mass, kg.
    pub mass: f64,
    /// Qubit transition angular frequency, rad/s.
    pub omega_mol: f64,
    /// Bias magnetic field, gauss (informational).
    pub b0: f64,
}

impl SpeciesParams {
    pub fn new(label: &str, d10: f64, mass: f64, omega_mol: f64, b0: f64) -> Result<Self> {
        if d10 <= 0.0 || mass <= 0.0 || omega_mol <= 0.0 {
            return Err(Error::Domain(format!(
                "species `{label}`: d10, mass and omega_mol must be positive"
            )));
        }
        Ok(Self { label: label.to_string(), d10, mass, omega_mol, b0 })
    }

    /// Construct from table-file units (Debye, u, ordinary Hz).
    pub fn from_table_units(
        label: &str,
        d10_debye: f64,
        mass_u: f64,
        f_mol_hz: f64,
        b0_gauss: f64,
    ) -> Result<Self> {
        Self::new(label, d10_debye * DEBYE, mass_u * ATOMIC_MASS, TAU * f_mol_hz, b0_gauss)
    }

    pub fn d10_debye(&self) -> f64 {
        self.d10 / DEBYE
    }
}

#[derive(Debug, Deserialize)]
struct TableFile {
    version: u32,
    species: BTreeMap<String, TableEntry>,
}

#[derive(Debug, Deserialize)]
struct TableEntry {
    label: String,
    d10_debye: f64,
    mass_u: f64,
    f_mol_hz: f64,
    b0_gauss: f64,
}

/// Species table keyed by lower-case name.
#[derive(Debug, Clone)]
pub struct SpeciesTable {
    pub version: u32,
    entries: BTreeMap<String, SpeciesParams>,
}

const BUILTIN_TABLE: &str = include_str!("../data/species.toml");

impl SpeciesTable {
    /// The table shipped with the crate (contains CaF and RbCs).
    pub fn builtin() -> Self {
        Self::from_str(BUILTIN_TABLE).expect("builtin species table must parse")
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let file: TableFile =
            toml::from_str(text).map_err(|e| Error::SpeciesTable(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (key, e) in file.species {
            let params = SpeciesParams::from_table_units(
                &e.label,
                e.d10_debye,
                e.mass_u,
                e.f_mol_hz,
                e.b0_gauss,
            )?;
            entries.insert(key.to_lowercase(), params);
        }
        Ok(Self { version: file.version, entries })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&SpeciesParams> {
        self.entries
            .get(&name.to_lowercase())
            .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// CaF constants from the builtin table.
pub fn caf() -> SpeciesParams {
    SpeciesTable::builtin().get("caf").unwrap().clone()
}

/// RbCs constants from the builtin table.
pub fn rbcs() -> SpeciesParams {
    SpeciesTable::builtin().get("rbcs").unwrap().clone()
}
