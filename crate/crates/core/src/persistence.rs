//! Checkpoints, metric logs and run manifests.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "COOPINIT"
//! format_version   u32
//! setup            u64 length + canonical JSON of the RunSetup
//! θ, φ             u64 length + f64 array each
//! adam_d, adam_g   m array, v array, u64 step_count, f64 lr, beta1, beta2, eps
//! consumed         u64
//! coop_consumed    u64
//! stage            u8  (0 cooperative, 1 adversarial, 2 done)
//! last losses      f64 d_loss, f64 g_loss
//! rng, data_rng    u64 length + 56 bytes each (seed, stream, word position)
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::ebm::Descriptor;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::nn::{AdamParams, AdamState, Mlp};
use crate::rng;
use crate::trainer::{IterationLosses, RunRecord, RunSetup, Stage, TrainerState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"COOPINIT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A run's configuration together with its complete training state.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub setup: RunSetup,
    pub state: TrainerState,
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
    fn array(&mut self, a: &[f64]) {
        self.u64(a.len() as u64);
        a.iter().for_each(|&v| self.f64(v));
    }
    fn adam(&mut self, s: &AdamState) {
        self.array(&s.m);
        self.array(&s.v);
        self.u64(s.step_count);
        self.f64(s.hyper.lr);
        self.f64(s.hyper.beta1);
        self.f64(s.hyper.beta2);
        self.f64(s.hyper.eps);
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated while reading {what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn len(&mut self, what: &str, elem: usize) -> Result<usize> {
        let n = self.u64(what)?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.checked_mul(elem as u64).is_none_or(|bytes| bytes > left) {
            return Err(Error::Format(format!(
                "length prefix {n} for {what} exceeds the {left} remaining bytes"
            )));
        }
        Ok(n as usize)
    }
    fn bytes(&mut self, what: &str) -> Result<&'a [u8]> {
        let n = self.len(what, 1)?;
        self.take(n, what)
    }
    fn array(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.len(what, 8)?;
        (0..n).map(|_| self.f64(what)).collect()
    }
    fn adam(&mut self, what: &str) -> Result<AdamState> {
        let m = self.array(what)?;
        let v = self.array(what)?;
        let step_count = self.u64(what)?;
        let hyper = AdamParams {
            lr: self.f64(what)?,
            beta1: self.f64(what)?,
            beta2: self.f64(what)?,
            eps: self.f64(what)?,
        };
        if m.len() != v.len() {
            return Err(Error::Format(format!("{what}: moment lengths differ")));
        }
        Ok(AdamState {
            m,
            v,
            step_count,
            hyper,
        })
    }
}

pub fn encode_checkpoint(setup: &RunSetup, state: &TrainerState) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(setup)
        .map_err(|e| Error::Format(format!("cannot serialize setup: {e}")))?;
    let mut e = Encoder(Vec::new());
    e.0.extend_from_slice(CHECKPOINT_MAGIC);
    e.u32(CHECKPOINT_VERSION);
    e.bytes(&json);
    e.array(state.descriptor.net.params());
    e.array(state.generator.net.params());
    e.adam(&state.adam_d);
    e.adam(&state.adam_g);
    e.u64(state.consumed);
    e.u64(state.coop_consumed);
    e.u8(state.stage.code());
    e.f64(state.last.d_loss);
    e.f64(state.last.g_loss);
    e.bytes(&rng::to_bytes(&state.rng));
    e.bytes(&rng::to_bytes(&state.data_rng));
    Ok(e.0)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint> {
    let mut d = Decoder { buf, pos: 0 };
    if d.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = d.u32("format_version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let setup: RunSetup = serde_json::from_slice(d.bytes("setup")?)
        .map_err(|e| Error::Format(format!("setup block: {e}")))?;
    let theta = d.array("descriptor parameters")?;
    let phi = d.array("generator parameters")?;
    let adam_d = d.adam("descriptor optimizer")?;
    let adam_g = d.adam("generator optimizer")?;
    let consumed = d.u64("consumed")?;
    let coop_consumed = d.u64("coop_consumed")?;
    let stage = Stage::from_code(d.u8("stage")?)?;
    let last = IterationLosses {
        d_loss: d.f64("d_loss")?,
        g_loss: d.f64("g_loss")?,
    };
    let rng_state = rng::from_bytes(d.bytes("rng")?)?;
    let data_rng = rng::from_bytes(d.bytes("data rng")?)?;
    if d.pos != buf.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint",
            buf.len() - d.pos
        )));
    }
    let net_err = |e: Error| Error::Format(format!("parameters do not fit the stored config: {e}"));
    let descriptor = Descriptor::new(
        Mlp::from_params(setup.models.descriptor.clone(), theta).map_err(net_err)?,
    )?;
    let generator = Generator::new(
        Mlp::from_params(setup.models.generator.clone(), phi).map_err(net_err)?,
    );
    if adam_d.m.len() != descriptor.net.param_count() || adam_g.m.len() != generator.net.param_count() {
        return Err(Error::Format("optimizer state does not match the networks".into()));
    }
    Ok(Checkpoint {
        state: TrainerState {
            descriptor,
            generator,
            adam_d,
            adam_g,
            consumed,
            coop_consumed,
            stage,
            rng: rng_state,
            data_rng,
            last,
        },
        setup,
    })
}

pub fn save_checkpoint(setup: &RunSetup, state: &TrainerState, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(setup, state)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub const METRICS_HEADER: [&str; 8] = [
    "consumed",
    "stage",
    "d_loss",
    "g_loss",
    "modes_covered",
    "hq_fraction",
    "energy_distance",
    "wall_ms",
];

/// Nine significant digits in scientific notation.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Appends [`RunRecord`]s to a CSV file, writing the header once.
pub struct MetricsSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    last_consumed: Option<u64>,
}

impl MetricsSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(METRICS_HEADER)?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_owned(),
            writer,
            last_consumed: None,
        })
    }

    /// Reopens an existing log, continuing after its last row.
    pub fn append_to(path: &Path) -> Result<Self> {
        let last_consumed = read_records(path)?.last().map(|r| r.consumed);
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_owned(),
            writer: csv::Writer::from_writer(BufWriter::new(file)),
            last_consumed,
        })
    }

    pub fn append_record(&mut self, r: &RunRecord) -> Result<()> {
        if let Some(last) = self.last_consumed {
            if r.consumed <= last {
                return Err(Error::Contract(format!(
                    "record at consumed={} does not follow {last}",
                    r.consumed
                )));
            }
        }
        self.writer.write_record([
            r.consumed.to_string(),
            r.stage.to_string(),
            format_sig9(r.d_loss),
            format_sig9(r.g_loss),
            r.modes_covered.to_string(),
            format_sig9(r.hq_fraction),
            format_sig9(r.energy_distance),
            r.wall_ms.to_string(),
        ])?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        self.last_consumed = Some(r.consumed);
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    let parse_err = |line: usize, field: &str| {
        Error::Format(format!("{}: bad {field} on data row {line}", path.display()))
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let num = |k: usize| row[k].parse::<f64>().map_err(|_| parse_err(i, METRICS_HEADER[k]));
        let int = |k: usize| row[k].parse::<u64>().map_err(|_| parse_err(i, METRICS_HEADER[k]));
        out.push(RunRecord {
            consumed: int(0)?,
            stage: row[1].parse().map_err(|_| parse_err(i, "stage"))?,
            d_loss: num(2)?,
            g_loss: num(3)?,
            modes_covered: int(4)? as usize,
            hq_fraction: num(5)?,
            energy_distance: num(6)?,
            wall_ms: int(7)?,
        });
    }
    Ok(out)
}

/// Flattens a JSON value into dotted keys.
pub fn flatten_json(prefix: &str, value: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_owned(), other.to_string());
        }
    }
}

/// Key-sorted `key = value` lines.
pub fn write_manifest(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push_str(" = ");
        text.push_str(v);
        text.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line.split_once(" = ").ok_or_else(|| {
            Error::Format(format!("{}: line {} is not `key = value`", path.display(), i + 1))
        })?;
        out.insert(k.to_owned(), v.to_owned());
    }
    Ok(out)
}
