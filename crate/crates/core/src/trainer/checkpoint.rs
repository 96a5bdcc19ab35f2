//! Versioned binary checkpoint container with an embedded config record and
//! a trailing content digest.

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::autograd::nn::ParamStore;
use crate::error::{Error, Result};
use crate::models::{
    add_autovc_params, add_classifier_params, add_discriminator_params, add_se_params,
};

use super::config::{diff_config_json, ProfileKind, TrainConfig};

const MAGIC: &[u8; 4] = b"SEVC";
const VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StageTag {
    Init,
    SePretrained,
    Joint,
    Gan,
    CleanAutovc,
    Cascade,
}

impl StageTag {
    fn code(self) -> u8 {
        match self {
            StageTag::Init => 0,
            StageTag::SePretrained => 1,
            StageTag::Joint => 2,
            StageTag::Gan => 3,
            StageTag::CleanAutovc => 4,
            StageTag::Cascade => 5,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => StageTag::Init,
            1 => StageTag::SePretrained,
            2 => StageTag::Joint,
            3 => StageTag::Gan,
            4 => StageTag::CleanAutovc,
            5 => StageTag::Cascade,
            _ => return Err(Error::Checkpoint(format!("unknown stage tag {c}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StageTag::Init => "init",
            StageTag::SePretrained => "se_pretrained",
            StageTag::Joint => "joint",
            StageTag::Gan => "gan",
            StageTag::CleanAutovc => "clean_autovc",
            StageTag::Cascade => "cascade",
        }
    }
}

/// Full training state: all four networks plus provenance.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub stage: StageTag,
    pub step: u64,
    /// Canonical JSON of the TrainConfig that produced this checkpoint.
    pub config_json: String,
    pub k: usize,
    pub se: Option<ParamStore>,
    pub vc: ParamStore,
    pub disc: ParamStore,
    pub cls: ParamStore,
}

impl Checkpoint {
    /// Deterministic initialization of every network from the config seed.
    pub fn init(cfg: &TrainConfig, k: usize) -> Self {
        let p = cfg.profile.model_profile();
        let mut se = ParamStore::new();
        add_se_params(
            &mut se,
            &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e00),
            &p,
        );
        let mut vc = ParamStore::new();
        add_autovc_params(
            &mut vc,
            &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xac00),
            &p,
            k,
        );
        let mut disc = ParamStore::new();
        add_discriminator_params(
            &mut disc,
            &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd100),
            &p,
            k,
        );
        let mut cls = ParamStore::new();
        add_classifier_params(
            &mut cls,
            &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc500),
            &p,
            k,
        );
        Checkpoint {
            stage: StageTag::Init,
            step: 0,
            config_json: cfg.canonical_json(),
            k,
            se: Some(se),
            vc,
            disc,
            cls,
        }
    }

    pub fn profile(&self) -> Result<ProfileKind> {
        Ok(self.config()?.profile)
    }

    pub fn config(&self) -> Result<TrainConfig> {
        serde_json::from_str(&self.config_json)
            .map_err(|e| Error::Checkpoint(format!("embedded config unreadable: {e}")))
    }

    /// Refuse mixing checkpoints made under a different configuration.
    pub fn verify_config(&self, cfg: &TrainConfig) -> Result<()> {
        let want = cfg.canonical_json();
        if self.config_json != want {
            let fields = diff_config_json(&self.config_json, &want).join("; ");
            return Err(Error::ConfigHashMismatch(format!(
                "checkpoint was produced under a different config; differing fields: {fields}"
            )));
        }
        Ok(())
    }
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_bytes(out: &mut Vec<u8>, b: &[u8]) {
    push_u64(out, b.len() as u64);
    out.extend_from_slice(b);
}

fn push_store(out: &mut Vec<u8>, store: &ParamStore) {
    let entries: Vec<_> = store.iter().collect();
    push_u64(out, entries.len() as u64);
    for (name, value) in entries {
        push_bytes(out, name.as_bytes());
        push_u64(out, value.ndim() as u64);
        for &d in value.shape() {
            push_u64(out, d as u64);
        }
        for &x in value.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}

fn read_store(r: &mut Reader) -> Result<ParamStore> {
    let n = r.u64()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..n {
        let name = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let ndim = r.u64()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f64()?);
        }
        let value = ArrayD::from_shape_vec(IxDyn(&shape), data)
            .map_err(|e| Error::Checkpoint(format!("bad parameter shape: {e}")))?;
        store.add(&name, value);
    }
    Ok(store)
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    push_bytes(&mut out, ck.config_json.as_bytes());
    push_u64(&mut out, ck.k as u64);
    out.push(ck.stage.code());
    push_u64(&mut out, ck.step);
    out.push(ck.se.is_some() as u8);
    if let Some(se) = &ck.se {
        push_store(&mut out, se);
    }
    push_store(&mut out, &ck.vc);
    push_store(&mut out, &ck.disc);
    push_store(&mut out, &ck.cls);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 32 {
        return Err(Error::Checkpoint("truncated checkpoint file".into()));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint(
            "checkpoint digest mismatch (file corrupt)".into(),
        ));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config_json = String::from_utf8(r.bytes()?.to_vec())
        .map_err(|_| Error::Checkpoint("embedded config is not UTF-8".into()))?;
    let k = r.u64()? as usize;
    let stage = StageTag::from_code(r.take(1)?[0])?;
    let step = r.u64()?;
    let has_se = r.take(1)?[0] != 0;
    let se = if has_se {
        Some(read_store(&mut r)?)
    } else {
        None
    };
    let vc = read_store(&mut r)?;
    let disc = read_store(&mut r)?;
    let cls = read_store(&mut r)?;
    Ok(Checkpoint {
        stage,
        step,
        config_json,
        k,
        se,
        vc,
        disc,
        cls,
    })
}
