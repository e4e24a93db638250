//! Model, sample and catalog files.
//!
//! Models are JSON `{n, masked_nodes?, h: [{node, value}], J: [{u, v, value}]}`
//! keyed by Chimera node ids. Sample files start with `n=<spins> count=<rows>`
//! followed by one line of space-separated ±1 per sample; a `.gz` suffix
//! selects gzip.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcl::ModeCatalog;
use crate::graph::ChimeraGraph;
use crate::model::{IsingModel, SampleSet, SpinConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub node: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerEntry {
    pub u: usize,
    pub v: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_nodes: Option<Vec<usize>>,
    pub h: Vec<FieldEntry>,
    #[serde(rename = "J")]
    pub j: Vec<CouplerEntry>,
}

impl ModelFile {
    pub fn from_model(model: &IsingModel) -> Self {
        let g = model.graph();
        let masked = g.masked_nodes();
        ModelFile {
            n: g.n(),
            masked_nodes: (!masked.is_empty()).then_some(masked),
            h: g.nodes()
                .iter()
                .zip(model.h())
                .map(|(&node, &value)| FieldEntry { node, value })
                .collect(),
            j: g.edges()
                .iter()
                .zip(model.j())
                .map(|(&(u, v), &value)| CouplerEntry { u, v, value })
                .collect(),
        }
    }

    /// Builds the model. Nodes and couplers left out of the lists get weight 0;
    /// entries naming masked or nonexistent elements are rejected.
    pub fn to_model(&self) -> Result<IsingModel> {
        let masked: BTreeSet<usize> = self.masked_nodes.iter().flatten().copied().collect();
        let g = Arc::new(ChimeraGraph::masked(self.n, &masked)?);
        let mut h = vec![0.0; g.node_count()];
        for f in &self.h {
            let i = g
                .index_of(f.node)
                .ok_or_else(|| Error::InvalidSpec(format!("field on inactive node {}", f.node)))?;
            h[i] = f.value;
        }
        let mut j = vec![0.0; g.edge_count()];
        for c in &self.j {
            let e = g
                .edge_index(c.u, c.v)
                .ok_or_else(|| Error::InvalidSpec(format!("no coupler between nodes {} and {}", c.u, c.v)))?;
            j[e] = c.value;
        }
        IsingModel::new(g, h, j)
    }
}

fn create(path: &Path) -> Result<Box<dyn Write>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    Ok(if is_gz(path) {
        Box::new(GzEncoder::new(f, Compression::default()))
    } else {
        Box::new(f)
    })
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(GzDecoder::new(f)))
    } else {
        Box::new(BufReader::new(f))
    })
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::parse(path, e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_model(path: &Path, model: &IsingModel) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn read_model(path: &Path) -> Result<IsingModel> {
    read_json::<ModelFile>(path)?.to_model()
}

pub fn write_samples_to<W: Write>(mut w: W, samples: &SampleSet) -> std::io::Result<()> {
    writeln!(w, "n={} count={}", samples.width(), samples.len())?;
    let mut line = String::with_capacity(3 * samples.width());
    for s in samples.iter() {
        line.clear();
        for (i, &x) in s.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(if x > 0 { "1" } else { "-1" });
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    write_samples_to(create(path)?, samples).map_err(|e| Error::io(path, e))
}

/// Reads a sample file whose rows follow the node order of `graph`.
pub fn read_samples(path: &Path, graph: Arc<ChimeraGraph>) -> Result<SampleSet> {
    let mut lines = open(path)?.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty sample file"))?
        .map_err(|e| Error::io(path, e))?;
    let (width, count) = parse_header(&header).ok_or_else(|| Error::parse(path, format!("bad header {header:?}")))?;
    if width != graph.node_count() {
        return Err(Error::parse(
            path,
            format!("{width} spins per sample but the model has {}", graph.node_count()),
        ));
    }
    let mut flat = Vec::with_capacity(width * count);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = flat.len();
        for tok in line.split_whitespace() {
            flat.push(match tok {
                "1" | "+1" => 1i8,
                "-1" => -1,
                t => return Err(Error::parse(path, format!("line {}: bad spin {t:?}", k + 2))),
            });
        }
        if flat.len() - before != width {
            return Err(Error::parse(path, format!("line {}: expected {width} spins", k + 2)));
        }
        rows += 1;
    }
    if rows != count {
        return Err(Error::parse(path, format!("header says {count} samples, found {rows}")));
    }
    SampleSet::from_flat(graph, flat)
}

fn parse_header(h: &str) -> Option<(usize, usize)> {
    let mut it = h.split_whitespace();
    let n = it.next()?.strip_prefix("n=")?.parse().ok()?;
    let c = it.next()?.strip_prefix("count=")?.parse().ok()?;
    it.next().is_none().then_some((n, c))
}

/// Sidecar listing the cluster-aligned minima of a generated problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub assignments: Vec<Vec<i8>>,
    pub energies: Vec<f64>,
    pub labels: Vec<String>,
    pub states: Vec<Vec<i8>>,
    pub ground_energy: f64,
    pub ground_count: usize,
    pub gap: f64,
}

impl CatalogFile {
    pub fn from_catalog(c: &ModeCatalog) -> Self {
        CatalogFile {
            assignments: c.entries.iter().map(|e| e.assignment.clone()).collect(),
            energies: c.energies(),
            labels: c
                .entries
                .iter()
                .map(|e| if e.ground { "ground" } else { "excited" }.to_string())
                .collect(),
            states: c.entries.iter().map(|e| e.state.as_slice().to_vec()).collect(),
            ground_energy: c.ground_energy,
            ground_count: c.ground_count,
            gap: c.gap,
        }
    }

    pub fn to_catalog(&self, graph: Arc<ChimeraGraph>) -> Result<ModeCatalog> {
        let k = self.assignments.len();
        if self.energies.len() != k || self.states.len() != k {
            return Err(Error::InvalidSpec("catalog lists have different lengths".into()));
        }
        let states = self
            .states
            .iter()
            .map(|s| {
                if s.len() != graph.node_count() {
                    return Err(Error::InvalidSpec(
                        "catalog state does not match the model graph".into(),
                    ));
                }
                SpinConfig::new(s.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeCatalog::assemble(
            self.assignments.clone(),
            states,
            self.energies.clone(),
            graph,
        ))
    }
}

pub fn write_catalog(path: &Path, catalog: &ModeCatalog) -> Result<()> {
    write_json(path, &CatalogFile::from_catalog(catalog))
}

pub fn read_catalog(path: &Path, graph: Arc<ChimeraGraph>) -> Result<ModeCatalog> {
    read_json::<CatalogFile>(path)?.to_catalog(graph)
}

/// Minimal CSV writer: a fixed header and rows of displayable cells.
pub struct CsvWriter {
    out: Box<dyn Write>,
    width: usize,
    path: std::path::PathBuf,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = CsvWriter {
            out: create(path)?,
            width: header.len(),
            path: path.to_path_buf(),
        };
        w.line(header.iter().map(|s| s.to_string()).collect())?;
        Ok(w)
    }

    fn line(&mut self, cells: Vec<String>) -> Result<()> {
        writeln!(self.out, "{}", cells.join(",")).map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[&dyn std::fmt::Display]) -> Result<()> {
        if cells.len() != self.width {
            return Err(Error::invalid(format!(
                "CSV row has {} cells, header has {}",
                cells.len(),
                self.width
            )));
        }
        self.line(cells.iter().map(|c| c.to_string()).collect())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_sample;
    use crate::fcl::{enumerate_cluster_minima, FclSpec};
    use crate::graph::build_chimera;
    use crate::testutil::{random_masked_model, random_weights};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn model_json_round_trip_is_exact(seed in any::<u64>()) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let m = random_masked_model(&mut r, 2, 32, 3.0);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.json");
            write_model(&p, &m).unwrap();
            let back = read_model(&p).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn samples_round_trip_plain_and_gz() {
        let g = Arc::new(build_chimera(1).unwrap());
        let m = random_weights(&mut ChaCha8Rng::seed_from_u64(1), g.clone(), 1.0);
        let s = exact_sample(&m, 1.0, 37, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["s.txt", "s.txt.gz"] {
            let p = dir.path().join(name);
            write_samples(&p, &s).unwrap();
            assert_eq!(read_samples(&p, g.clone()).unwrap(), s);
        }
        let text = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
        assert!(text.starts_with("n=8 count=37\n"));
    }

    #[test]
    fn malformed_samples_rejected() {
        let g = Arc::new(build_chimera(1).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        for body in [
            "n=8 count=1\n1 1 1 1 1 1 1\n",
            "n=8 count=2\n1 1 1 1 1 1 1 1\n",
            "n=8 count=1\n1 1 1 1 1 1 1 0\n",
            "n=9 count=0\n",
            "count=1\n",
        ] {
            std::fs::write(&p, body).unwrap();
            assert!(read_samples(&p, g.clone()).is_err(), "{body:?}");
        }
    }

    #[test]
    fn catalog_round_trip() {
        let spec = FclSpec::fcl(2).unwrap();
        let m = spec.build().unwrap();
        let c = enumerate_cluster_minima(&m, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        write_catalog(&p, &c).unwrap();
        let back = read_catalog(&p, m.graph_arc().clone()).unwrap();
        assert_eq!(CatalogFile::from_catalog(&back), CatalogFile::from_catalog(&c));
    }

    #[test]
    fn model_file_rejects_missing_coupler() {
        let f = ModelFile {
            n: 1,
            masked_nodes: None,
            h: vec![],
            j: vec![CouplerEntry { u: 0, v: 1, value: 1.0 }],
        };
        assert!(f.to_model().is_err());
    }
}
