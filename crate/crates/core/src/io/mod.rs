//! Persistence: CXT1 containers for every pipeline artefact, PGM
//! rendering, CSV traces and run manifests.

mod cxt1;
mod pgm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub use cxt1::{write_atomic, Cxt1, Payload, MAGIC, VERSION};
pub use pgm::{render_frame, render_profile, GrayImage};

use crate::acquisition::{KSpaceData, NavigatorMatrix, NavigatorRow, RadialTrajectory};
use crate::dae::{DaeParameters, TrainConfig, TrainHistory, TrainedDae};
use crate::error::{Error, Result};
use crate::numerics::{CasoratiMatrix, ComplexTensor};
use crate::phantom::CoilMapSet;
use crate::priors::SubspaceBasis;
use crate::recon::IterationRecord;

/// Conversion to and from a CXT1 container.
pub trait Persist: Sized {
    const KIND: &'static str;
    fn to_container(&self) -> Result<Cxt1>;
    fn from_container(c: &Cxt1) -> Result<Self>;
}

pub fn save<T: Persist>(path: &Path, value: &T) -> Result<()> {
    value.to_container()?.write(path)
}

pub fn load<T: Persist>(path: &Path) -> Result<T> {
    T::from_container(&Cxt1::read(path)?)
}

fn meta_with_kind(kind: &str, entries: Vec<(&str, Value)>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("kind".into(), json!(kind));
    for (k, v) in entries {
        m.insert(k.into(), v);
    }
    m
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable metadata")
}

fn bad_dims<T>(kind: &str, dims: &[usize]) -> Result<T> {
    Err(Error::Format(format!("{kind} container has unexpected dims {dims:?}")))
}

impl Persist for CasoratiMatrix {
    const KIND: &'static str = "casorati";

    fn to_container(&self) -> Result<Cxt1> {
        Cxt1::new(
            vec![self.pixels(), self.frames()],
            meta_with_kind(Self::KIND, vec![("height", json!(self.height())), ("width", json!(self.width()))]),
            Payload::Complex(self.data().to_vec()),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        let (h, w): (usize, usize) = (c.meta("height")?, c.meta("width")?);
        if c.dims.len() != 2 || c.dims[0] != h * w {
            return bad_dims(Self::KIND, &c.dims);
        }
        CasoratiMatrix::new(h, w, c.dims[1], c.complex()?.to_vec())
    }
}

impl Persist for CoilMapSet {
    const KIND: &'static str = "coil-maps";

    fn to_container(&self) -> Result<Cxt1> {
        Cxt1::new(
            vec![self.n_coils(), self.height, self.width],
            meta_with_kind(Self::KIND, vec![]),
            Payload::Complex(self.maps.concat()),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        if c.dims.len() != 3 {
            return bad_dims(Self::KIND, &c.dims);
        }
        let m = c.dims[1] * c.dims[2];
        let maps = c.complex()?.chunks(m).map(<[_]>::to_vec).collect();
        CoilMapSet::new(c.dims[1], c.dims[2], maps)
    }
}

impl Persist for KSpaceData {
    const KIND: &'static str = "kspace";

    fn to_container(&self) -> Result<Cxt1> {
        Cxt1::new(
            self.dims().to_vec(),
            meta_with_kind(
                Self::KIND,
                vec![
                    ("trajectory", to_value(&self.trajectory)),
                    ("image_height", json!(self.image_shape.0)),
                    ("image_width", json!(self.image_shape.1)),
                    ("noise_sigma", json!(self.noise_sigma)),
                ],
            ),
            Payload::Complex(self.samples.clone()),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        let traj: RadialTrajectory = c.meta("trajectory")?;
        if c.dims.len() != 4
            || c.dims[0] != traj.n_frames
            || c.dims[2] != traj.spokes_per_frame
            || c.dims[3] != traj.n_readout
        {
            return bad_dims(Self::KIND, &c.dims);
        }
        KSpaceData::new(
            traj,
            (c.meta("image_height")?, c.meta("image_width")?),
            c.dims[1],
            c.meta("noise_sigma")?,
            c.complex()?.to_vec(),
        )
    }
}

impl Persist for NavigatorMatrix {
    const KIND: &'static str = "navigators";

    fn to_container(&self) -> Result<Cxt1> {
        Cxt1::new(
            self.data.dims().to_vec(),
            meta_with_kind(Self::KIND, vec![("rows", to_value(&self.rows))]),
            Payload::Complex(self.data.data().to_vec()),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        let rows: Vec<NavigatorRow> = c.meta("rows")?;
        if c.dims.len() != 2 || c.dims[0] != rows.len() {
            return bad_dims(Self::KIND, &c.dims);
        }
        Ok(NavigatorMatrix {
            rows,
            data: ComplexTensor::new(c.dims.clone(), c.complex()?.to_vec())?,
        })
    }
}

impl Persist for SubspaceBasis {
    const KIND: &'static str = "subspace-basis";

    fn to_container(&self) -> Result<Cxt1> {
        Cxt1::new(
            self.v.dims().to_vec(),
            meta_with_kind(
                Self::KIND,
                vec![
                    ("singular_values", to_value(&self.singular_values)),
                    ("source", json!(self.source)),
                ],
            ),
            Payload::Complex(self.v.data().to_vec()),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        if c.dims.len() != 2 {
            return bad_dims(Self::KIND, &c.dims);
        }
        SubspaceBasis::from_columns(
            ComplexTensor::new(c.dims.clone(), c.complex()?.to_vec())?,
            c.meta("singular_values")?,
            c.meta("source")?,
        )
    }
}

impl Persist for TrainedDae {
    const KIND: &'static str = "dae";

    fn to_container(&self) -> Result<Cxt1> {
        let flat = self.params.to_flat();
        Cxt1::new(
            vec![flat.len()],
            meta_with_kind(
                Self::KIND,
                vec![
                    ("dims", to_value(&self.params.dims)),
                    ("gamma", json!(self.gamma)),
                    ("train_config", to_value(&self.config)),
                    ("history", to_value(&self.history)),
                ],
            ),
            Payload::Real(flat),
        )
    }

    fn from_container(c: &Cxt1) -> Result<Self> {
        c.expect_kind(Self::KIND)?;
        let dims: Vec<usize> = c.meta("dims")?;
        let config: TrainConfig = c.meta("train_config")?;
        let history: TrainHistory = c.meta("history")?;
        Ok(TrainedDae {
            params: DaeParameters::from_flat(&dims, c.real()?)?,
            gamma: c.meta("gamma")?,
            config,
            history,
        })
    }
}

/// `iteration,data_term,prior_term,objective,cg_iterations,cg_residual,relative_change`
pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,data_term,prior_term,objective,cg_iterations,cg_residual,relative_change\n");
    for (k, r) in records.iter().enumerate() {
        out += &format!(
            "{k},{:.10e},{:.10e},{:.10e},{},{:.6e},{:.6e}\n",
            r.data_term,
            r.prior_term,
            r.data_term + r.prior_term,
            r.cg_iterations,
            r.cg_residual,
            r.relative_change
        );
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance record written next to each stage's outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    /// File name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(stage: &str, config: Value) -> Self {
        Self {
            stage: stage.into(),
            config,
            ..Default::default()
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }
}
