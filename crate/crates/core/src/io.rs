//! Edge-list ingestion and serialization.
//!
//! The text format is one record per line, `layer<TAB>src<TAB>dst`. Lines
//! starting with `#` and blank lines are ignored. An optional JSON manifest
//! can pin the layer count, the index base and the node-name table.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{MultiLayerNetwork, Partition};

/// Sidecar description of an edge-list file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Declared layer count. When present, layer tokens are integers
    /// `base..base + layers` and empty layers are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_base: Option<usize>,
    /// Node-name table in index order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<String>>,
    /// Declared node count for numeric node ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_nodes: Option<bool>,
}

impl Manifest {
    /// Manifest that lets [`load_multilayer_edgelist`] rebuild `net` exactly
    /// from the output of [`write_edgelist`].
    pub fn describe(net: &MultiLayerNetwork) -> Self {
        match net.node_names() {
            Some(names) => Manifest {
                layers: Some(net.layer_count()),
                index_base: Some(1),
                nodes: Some(names.to_vec()),
                n: None,
                numeric_nodes: None,
            },
            None => Manifest {
                layers: Some(net.layer_count()),
                index_base: Some(1),
                nodes: None,
                n: Some(net.node_count()),
                numeric_nodes: Some(true),
            },
        }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub separator: char,
    /// Base of numeric ids (layers when the manifest declares a count, and
    /// nodes when `numeric_nodes` is set). 0 or 1.
    pub index_base: usize,
    /// Parse node tokens as integer indices instead of names.
    pub numeric_nodes: bool,
    /// Accept node names missing from the manifest's node table.
    pub auto_register: bool,
    pub manifest: Option<Manifest>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            separator: '\t',
            index_base: 1,
            numeric_nodes: false,
            auto_register: true,
            manifest: None,
        }
    }
}

impl IngestOptions {
    fn resolved(&self) -> Result<Resolved> {
        let m = self.manifest.clone().unwrap_or_default();
        let base = m.index_base.unwrap_or(self.index_base);
        if base > 1 {
            return Err(Error::InvalidParameter(format!("index base must be 0 or 1, got {base}")));
        }
        Ok(Resolved {
            base,
            numeric: m.numeric_nodes.unwrap_or(self.numeric_nodes),
            declared_layers: m.layers,
            declared_n: m.n.or(m.nodes.as_ref().map(Vec::len)),
            names: m.nodes,
        })
    }
}

struct Resolved {
    base: usize,
    numeric: bool,
    declared_layers: Option<usize>,
    declared_n: Option<usize>,
    names: Option<Vec<String>>,
}

struct Builder<'a> {
    opts: &'a IngestOptions,
    res: Resolved,
    name_index: HashMap<String, usize>,
    names: Vec<String>,
    max_numeric: Option<usize>,
    layer_index: HashMap<String, usize>,
    layer_edges: Vec<Vec<(usize, usize)>>,
    records: usize,
}

impl<'a> Builder<'a> {
    fn new(opts: &'a IngestOptions) -> Result<Self> {
        let res = opts.resolved()?;
        let mut name_index = HashMap::new();
        let mut names = Vec::new();
        if let Some(table) = &res.names {
            for (i, name) in table.iter().enumerate() {
                if name_index.insert(name.clone(), i).is_some() {
                    return Err(Error::InvalidParameter(format!("duplicate node name {name:?} in manifest")));
                }
                names.push(name.clone());
            }
        }
        let layer_edges = vec![Vec::new(); res.declared_layers.unwrap_or(0)];
        Ok(Builder {
            opts,
            res,
            name_index,
            names,
            max_numeric: None,
            layer_index: HashMap::new(),
            layer_edges,
            records: 0,
        })
    }

    fn parse_index(&self, token: &str, line: usize, what: &str, limit: Option<usize>) -> Result<usize> {
        let value: i128 = token.parse().map_err(|_| Error::Parse {
            line,
            message: format!("{what} id {token:?} is not an integer"),
        })?;
        let range = |message: String| Error::Range {
            line,
            value: token.to_string(),
            message,
        };
        let base = self.res.base as i128;
        if value < base {
            return Err(range(format!("{what} ids start at {base}")));
        }
        let idx = usize::try_from(value - base).map_err(|_| range("overflow".into()))?;
        if idx >= u32::MAX as usize {
            return Err(range("overflow".into()));
        }
        if let Some(limit) = limit {
            if idx >= limit {
                return Err(range(format!("{what} count is {limit}")));
            }
        }
        Ok(idx)
    }

    fn node(&mut self, token: &str, line: usize) -> Result<usize> {
        if self.res.numeric {
            let idx = self.parse_index(token, line, "node", self.res.declared_n)?;
            self.max_numeric = Some(self.max_numeric.map_or(idx, |m| m.max(idx)));
            return Ok(idx);
        }
        if let Some(&i) = self.name_index.get(token) {
            return Ok(i);
        }
        if self.res.names.is_some() && !self.opts.auto_register {
            return Err(Error::Range {
                line,
                value: token.to_string(),
                message: "node not in the manifest node table".into(),
            });
        }
        let i = self.names.len();
        self.names.push(token.to_string());
        self.name_index.insert(token.to_string(), i);
        Ok(i)
    }

    fn layer(&mut self, token: &str, line: usize) -> Result<usize> {
        if let Some(t) = self.res.declared_layers {
            return self.parse_index(token, line, "layer", Some(t));
        }
        if let Some(&l) = self.layer_index.get(token) {
            return Ok(l);
        }
        let l = self.layer_edges.len();
        self.layer_index.insert(token.to_string(), l);
        self.layer_edges.push(Vec::new());
        Ok(l)
    }

    fn add(&mut self, layer: usize, src: &str, dst: &str, line: usize) -> Result<()> {
        let i = self.node(src, line)?;
        let j = self.node(dst, line)?;
        self.layer_edges[layer].push((i, j));
        self.records += 1;
        Ok(())
    }

    fn finish(self) -> Result<MultiLayerNetwork> {
        let declared_everything = self.res.declared_layers.is_some() && self.res.declared_n.is_some();
        if self.records == 0 && !declared_everything {
            return Err(Error::EmptyInput);
        }
        let n = if self.res.numeric {
            self.res
                .declared_n
                .unwrap_or_else(|| self.max_numeric.map_or(0, |m| m + 1))
        } else {
            self.names.len()
        };
        let net = MultiLayerNetwork::from_edge_lists(n, &self.layer_edges)?;
        if self.res.numeric {
            Ok(net)
        } else {
            net.with_node_names(self.names)
        }
    }
}

fn fields(line: &str, sep: char) -> Vec<&str> {
    line.split(sep).map(str::trim).collect()
}

fn record_lines<R: Read>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| match line {
            Err(e) => Some(Err(Error::Io(e))),
            Ok(text) => {
                let trimmed = text.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((idx + 1, trimmed.to_string())))
                }
            }
        })
}

/// Reads a layer-tagged edge list.
pub fn load_multilayer_edgelist<R: Read>(reader: R, options: &IngestOptions) -> Result<MultiLayerNetwork> {
    let mut b = Builder::new(options)?;
    for record in record_lines(reader) {
        let (line, text) = record?;
        let f = fields(&text, options.separator);
        if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
            return Err(Error::Parse {
                line,
                message: format!("expected `layer{0}src{0}dst`, found {1} field(s)", options.separator.escape_default(), f.len()),
            });
        }
        let layer = b.layer(f[0], line)?;
        b.add(layer, f[1], f[2], line)?;
    }
    b.finish()
}

/// Reads one `src<sep>dst` edge list per layer, in order.
pub fn load_layer_files<R: Read>(readers: Vec<R>, options: &IngestOptions) -> Result<MultiLayerNetwork> {
    let mut b = Builder::new(options)?;
    if b.res.declared_layers.is_some_and(|t| t != readers.len()) {
        return Err(Error::InvalidParameter(format!(
            "manifest declares {:?} layers but {} files were given",
            b.res.declared_layers,
            readers.len()
        )));
    }
    b.layer_edges = vec![Vec::new(); readers.len()];
    for (l, reader) in readers.into_iter().enumerate() {
        for record in record_lines(reader) {
            let (line, text) = record?;
            let f = fields(&text, options.separator);
            if f.len() != 2 || f.iter().any(|s| s.is_empty()) {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `src{0}dst`, found {1} field(s)", options.separator.escape_default(), f.len()),
                });
            }
            b.add(l, f[0], f[1], line)?;
        }
    }
    b.finish()
}

/// Writes `net` deterministically: layers ascending (one-based), edges in
/// lexicographic index order, node names when the network has them and
/// one-based indices otherwise.
pub fn write_edgelist<W: Write>(net: &MultiLayerNetwork, mut writer: W) -> Result<()> {
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, j) in layer.edges() {
            let (a, b) = match net.node_names() {
                Some(names) => (names[i].clone(), names[j].clone()),
                None => ((i + 1).to_string(), (j + 1).to_string()),
            };
            writeln!(writer, "{}\t{a}\t{b}", l + 1)?;
        }
    }
    Ok(())
}

/// One one-based label per line.
pub fn write_labels<W: Write>(p: &Partition, mut writer: W) -> Result<()> {
    for c in p.one_based() {
        writeln!(writer, "{c}")?;
    }
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Partition> {
    let mut labels = Vec::new();
    for record in record_lines(reader) {
        let (line, text) = record?;
        let v: usize = text.parse().map_err(|_| Error::Parse {
            line,
            message: format!("label {text:?} is not a positive integer"),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    Partition::from_one_based(&labels)
}

/// Result of a `detect` run as written by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub n: usize,
    pub k: usize,
    /// One-based community labels.
    pub labels: Vec<usize>,
    pub method: String,
    pub tau: f64,
    pub seed: u64,
    pub eigenvalues: Vec<f64>,
}

impl LabelsFile {
    pub fn partition(&self) -> Result<Partition> {
        let p = Partition::from_one_based(&self.labels)?;
        Partition::new(p.labels().to_vec(), self.k.max(p.k()))
    }
}

/// Reads labels from either a [`LabelsFile`] JSON document or a plain
/// one-label-per-line file.
pub fn read_partition<R: Read>(mut reader: R) -> Result<Partition> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.trim_start().starts_with('{') {
        let file: LabelsFile = serde_json::from_str(&text)?;
        file.partition()
    } else {
        read_labels(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(text: &str) -> Result<MultiLayerNetwork> {
        load_multilayer_edgelist(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn symmetric_dedup_and_layer_order() {
        let net = load("1\ta\tb\n1\tb\ta\n2\ta\tc\n").unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.layer_count(), 2);
        assert_eq!(net.node_names().unwrap(), &["a", "b", "c"]);
        assert_eq!(net.layer(0).unwrap().edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(net.layer(1).unwrap().edges().collect::<Vec<_>>(), vec![(0, 2)]);
        assert!(net.validate().is_empty());
    }

    #[test]
    fn layers_follow_first_appearance() {
        let net = load("# header\nfriendship\tx\ty\n\nadvice\ty\tz\n").unwrap();
        assert_eq!(net.layer(0).unwrap().edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(net.layer(1).unwrap().edges().collect::<Vec<_>>(), vec![(1, 2)]);
    }

    #[test]
    fn wrong_separator_is_a_parse_error() {
        match load("1,a,b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match load("1\ta\tb\n\n1\ta\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let comma = IngestOptions {
            separator: ',',
            ..Default::default()
        };
        assert!(load_multilayer_edgelist("1,a,b\n".as_bytes(), &comma).is_ok());
    }

    #[test]
    fn empty_input() {
        assert!(matches!(load(""), Err(Error::EmptyInput)));
        assert!(matches!(load("# nothing\n\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn numeric_ids_and_ranges() {
        let opts = IngestOptions {
            numeric_nodes: true,
            index_base: 0,
            ..Default::default()
        };
        let net = load_multilayer_edgelist("1\t0\t3\n".as_bytes(), &opts).unwrap();
        assert_eq!(net.node_count(), 4);
        assert!(net.node_names().is_none());

        assert!(matches!(
            load_multilayer_edgelist("1\t-1\t3\n".as_bytes(), &opts),
            Err(Error::Range { line: 1, .. })
        ));
        assert!(matches!(
            load_multilayer_edgelist("1\t0\t99999999999999999999999\n".as_bytes(), &opts),
            Err(Error::Range { .. })
        ));
        let one = IngestOptions {
            numeric_nodes: true,
            ..Default::default()
        };
        assert!(matches!(
            load_multilayer_edgelist("1\t0\t2\n".as_bytes(), &one),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            load_multilayer_edgelist("1\tx\t2\n".as_bytes(), &one),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn manifest_node_table() {
        let manifest = Manifest {
            nodes: Some(vec!["z".into(), "y".into(), "x".into()]),
            ..Default::default()
        };
        let strict = IngestOptions {
            auto_register: false,
            manifest: Some(manifest.clone()),
            ..Default::default()
        };
        let net = load_multilayer_edgelist("1\tx\ty\n".as_bytes(), &strict).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.layer(0).unwrap().edges().collect::<Vec<_>>(), vec![(1, 2)]);
        assert!(matches!(
            load_multilayer_edgelist("1\tx\tw\n".as_bytes(), &strict),
            Err(Error::Range { .. })
        ));
        let lax = IngestOptions {
            manifest: Some(manifest),
            ..Default::default()
        };
        assert_eq!(load_multilayer_edgelist("1\tx\tw\n".as_bytes(), &lax).unwrap().node_count(), 4);
    }

    #[test]
    fn per_layer_files() {
        let files = vec!["a\tb\n".as_bytes(), "b\tc\nc\tb\n".as_bytes(), "".as_bytes()];
        let net = load_layer_files(files, &IngestOptions::default()).unwrap();
        assert_eq!(net.layer_count(), 3);
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.layer(2).unwrap().edge_count(), 0);
    }

    #[test]
    fn layers_renumbered_by_first_appearance() {
        let net = load("2\tc\ta\n1\tb\ta\n1\tc\ta\n").unwrap();
        let mut out = Vec::new();
        write_edgelist(&net, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1\tc\ta\n2\tc\ta\n2\ta\tb\n");
    }

    #[test]
    fn labels_files() {
        let p = read_labels("2\n1\n\n3\n".as_bytes()).unwrap();
        assert_eq!(p.labels(), &[1, 0, 2]);
        let mut out = Vec::new();
        write_labels(&p, &mut out).unwrap();
        assert_eq!(read_partition(out.as_slice()).unwrap(), p);
        assert!(read_labels("0\n".as_bytes()).is_err());
    }

    fn arb_network() -> impl Strategy<Value = MultiLayerNetwork> {
        (2usize..12, 1usize..4).prop_flat_map(|(n, t)| {
            (
                Just(n),
                proptest::collection::vec(proptest::collection::vec((0..n, 0..n), 0..20), t),
                any::<bool>(),
            )
                .prop_map(|(n, layers, named)| {
                    let net = MultiLayerNetwork::from_edge_lists(n, &layers).unwrap();
                    if named {
                        net.with_node_names((0..n).map(|i| format!("v{}", (i * 7) % 13 + 100 * i)).collect())
                            .unwrap()
                    } else {
                        net
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_with_manifest(net in arb_network()) {
            let mut text = Vec::new();
            write_edgelist(&net, &mut text).unwrap();
            let opts = IngestOptions { manifest: Some(Manifest::describe(&net)), ..Default::default() };
            let back = load_multilayer_edgelist(text.as_slice(), &opts).unwrap();
            prop_assert_eq!(&back, &net);
            let mut again = Vec::new();
            write_edgelist(&back, &mut again).unwrap();
            prop_assert_eq!(again, text);
        }

        #[test]
        fn ingested_networks_validate(records in proptest::collection::vec((1u8..4, 0u8..8, 0u8..8), 1..40)) {
            let text: String = records.iter().map(|(l, a, b)| format!("{l}\tn{a}\tn{b}\n")).collect();
            let net = load(&text).unwrap();
            let diags = net.validate();
            let only_isolated = diags.iter().all(|d| matches!(d, crate::network::Diagnostic::IsolatedNode { .. }));
            prop_assert!(only_isolated);
            for l in 0..net.layer_count() {
                let d = net.degree_vector(l).unwrap();
                prop_assert_eq!(d.degrees.iter().sum::<usize>(), 2 * net.layer(l).unwrap().edge_count());
            }
        }
    }
}
