//! Model bundles: a magic string, a version, a JSON header describing the
//! vocabularies, labels and array shapes, then little-endian `f32` arrays.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use super::params::{Hyper, ModelParams};
use super::vocab::Vocabulary;
use super::{EncoderError, Model, Real};
use crate::treebank::LabelInventory;

pub const MAGIC: &[u8; 8] = b"SPANPRS\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    hyper: Hyper,
    vocab: Vocabulary,
    labels: LabelInventory,
    arrays: Vec<ArrayEntry>,
}

pub fn save<F: Real, W: Write>(model: &Model<F>, mut out: W) -> Result<(), EncoderError> {
    let named = model.params.named();
    let header = Header {
        hyper: model.hyper.clone(),
        vocab: model.vocab.clone(),
        labels: model.labels.clone(),
        arrays: named.iter().map(|(name, a)| ArrayEntry { name: name.clone(), shape: a.shape().to_vec() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, a) in &named {
        let mut buf = Vec::with_capacity(4 * a.len());
        for v in a.iter() {
            buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<(), EncoderError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EncoderError::Truncated,
        _ => EncoderError::Io(e),
    })
}

pub fn load<F: Real, R: Read>(mut input: R) -> Result<Model<F>, EncoderError> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(&mut input, &mut magic)?;
    if &magic != MAGIC {
        return Err(EncoderError::UnsupportedFormat);
    }
    let mut word = [0u8; 4];
    read_exact_or_truncated(&mut input, &mut word)?;
    if u32::from_le_bytes(word) != VERSION {
        return Err(EncoderError::UnsupportedFormat);
    }
    let mut len = [0u8; 8];
    read_exact_or_truncated(&mut input, &mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| EncoderError::Truncated)?;
    if len > 1 << 32 {
        return Err(EncoderError::UnsupportedFormat);
    }
    let mut json = vec![0u8; len];
    read_exact_or_truncated(&mut input, &mut json)?;
    let header: Header = serde_json::from_slice(&json)?;

    let mut stored: HashMap<String, ArrayD<F>> = HashMap::new();
    for entry in &header.arrays {
        let count: usize = entry.shape.iter().product();
        let mut bytes = vec![0u8; 4 * count];
        read_exact_or_truncated(&mut input, &mut bytes)?;
        let values: Vec<F> =
            bytes.chunks_exact(4).map(|c| F::from_f32(f32::from_le_bytes([c[0], c[1], c[2], c[3]])).unwrap()).collect();
        let array = ArrayD::from_shape_vec(entry.shape.clone(), values)
            .map_err(|_| EncoderError::ShapeMismatch { name: entry.name.clone() })?;
        stored.insert(entry.name.clone(), array);
    }

    let sizes: Vec<usize> = header.vocab.columns.iter().map(|c| c.len()).collect();
    let mut params = ModelParams::zeros(&header.hyper, &sizes, header.labels.len());
    for (name, mut slot) in params.named_mut() {
        let array = stored.get(&name).ok_or_else(|| EncoderError::MissingArray { name: name.clone() })?;
        if array.shape() != slot.shape() {
            return Err(EncoderError::ShapeMismatch { name });
        }
        slot.assign(array);
    }
    Ok(Model::new(header.hyper, header.vocab, header.labels, params))
}

pub fn save_file<F: Real>(model: &Model<F>, path: &Path) -> Result<(), EncoderError> {
    save(model, BufWriter::new(File::create(path)?))
}

pub fn load_file<F: Real>(path: &Path) -> Result<Model<F>, EncoderError> {
    load(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::vocab::build_vocab;
    use crate::treebank::{build_label_inventory, collapse_unaries, read_trees, Tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model<f32> {
        let trees: Vec<Tree> = read_trees("(S (NP (PRP I)) (VP (VBD ate) (NP (NN fish))))")
            .unwrap()
            .into_iter()
            .map(collapse_unaries)
            .collect();
        let vocab = build_vocab(&[trees[0].tokens()], 0.1).unwrap();
        let labels = build_label_inventory(&trees).unwrap();
        let hyper = Hyper { word_dim: 3, tag_dim: 2, lstm_units: 4, hidden_units: 5, ..Hyper::default() };
        Model::initialize(hyper, vocab, labels, &mut ChaCha8Rng::seed_from_u64(2))
    }

    fn bytes(m: &Model<f32>) -> Vec<u8> {
        let mut out = Vec::new();
        save(m, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back: Model<f32> = load(&bytes(&m)[..]).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.hyper, m.hyper);
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.labels.chains(), m.labels.chains());
        let tokens = read_trees("(S (NP (PRP I)) (VP (VBD ate) (NP (NN fish))))").unwrap()[0].tokens();
        assert_eq!(back.parse(&tokens).unwrap().1, m.parse(&tokens).unwrap().1);
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let mut b = bytes(&model());
        b[0] = b'X';
        assert!(matches!(load::<f32, _>(&b[..]), Err(EncoderError::UnsupportedFormat)));
        let mut b = bytes(&model());
        b[8] = 2;
        assert!(matches!(load::<f32, _>(&b[..]), Err(EncoderError::UnsupportedFormat)));
    }

    #[test]
    fn rejects_truncation() {
        let b = bytes(&model());
        for cut in [3, 10, 30, b.len() - 1] {
            assert!(matches!(load::<f32, _>(&b[..cut]), Err(EncoderError::Truncated)), "cut {cut}");
        }
    }

    fn rewrite_header(b: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
        let len = u64::from_le_bytes(b[12..20].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&b[20..20 + len]).unwrap();
        edit(&mut header);
        let json = serde_json::to_vec(&header).unwrap();
        let mut out = b[..12].to_vec();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&b[20 + len..]);
        out
    }

    #[test]
    fn rejects_shape_mismatch_and_missing_arrays() {
        let b = bytes(&model());
        let bad = rewrite_header(&b, |h| {
            h["arrays"][3]["shape"] = serde_json::json!([4, 16]);
        });
        match load::<f32, _>(&bad[..]) {
            Err(EncoderError::ShapeMismatch { name }) => assert_eq!(name, "lstm1.fwd.u"),
            other => panic!("{other:?}"),
        }
        let renamed = rewrite_header(&b, |h| {
            h["arrays"][0]["name"] = serde_json::json!("embed.bogus");
        });
        match load::<f32, _>(&renamed[..]) {
            Err(EncoderError::MissingArray { name }) => assert_eq!(name, "embed.word"),
            other => panic!("{other:?}"),
        }
    }
}
