//! Whitespace tokenizer with a vocabulary built from train-split captions.

use super::EncoderError;
use std::collections::HashMap;
use std::path::Path;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token table with reserved PAD/UNK ids and a fixed sequence length.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub max_len: usize,
}

impl Vocab {
    /// Builds from caption text: lowercase, whitespace-split, deduplicated,
    /// lexicographically ordered so identical corpora give identical tables.
    pub fn build(vocab_source: &str, max_len: usize) -> Vocab {
        let mut words: Vec<String> = vocab_source
            .split_whitespace()
            .map(|w| w.to_lowercase())
            .collect();
        words.sort();
        words.dedup();
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(words);
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index, max_len }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercase, split on whitespace, map to ids (UNK for unknowns), then
    /// truncate or pad to the fixed length. Total on any input.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        let mut ids: Vec<usize> = text
            .split_whitespace()
            .map(|w| {
                let w = w.to_lowercase();
                self.index.get(&w).copied().unwrap_or(UNK)
            })
            .take(self.max_len)
            .collect();
        ids.resize(self.max_len, PAD);
        ids
    }

    fn file_body(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    /// Hex digest over the serialized token list; checkpoints pin this.
    pub fn digest(&self) -> String {
        crate::util::sha256_hex(self.file_body().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        std::fs::write(path, self.file_body())?;
        Ok(())
    }

    pub fn load(path: &Path, max_len: usize) -> Result<Vocab, EncoderError> {
        let body = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = body.lines().map(|l| l.to_string()).collect();
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(EncoderError::BadVocabFile(path.display().to_string()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocab { tokens, index, max_len })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::build("red dress with long sleeves\nblue dress", 12)
    }

    #[test]
    fn known_tokens_map_and_pad_fills() {
        let v = vocab();
        let ids = v.tokenize("red dress");
        assert_eq!(ids.len(), 12);
        assert!(ids[0] > UNK && ids[1] > UNK);
        assert_ne!(ids[0], ids[1]);
        assert!(ids[2..].iter().all(|&i| i == PAD));
    }

    #[test]
    fn empty_text_is_all_pad() {
        assert!(vocab().tokenize("").iter().all(|&i| i == PAD));
    }

    #[test]
    fn unknown_token_maps_to_unk() {
        let ids = vocab().tokenize("red zzz dress");
        assert_eq!(ids[1], UNK);
        assert_ne!(ids[0], UNK);
        assert_ne!(ids[2], UNK);
    }

    #[test]
    fn build_is_order_stable() {
        let a = Vocab::build("b a c", 12);
        let b = Vocab::build("c b a a", 12);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn save_load_round_trip() {
        let v = vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        let loaded = Vocab::load(&path, 12).unwrap();
        assert_eq!(loaded.digest(), v.digest());
        assert_eq!(loaded.tokenize("red dress"), v.tokenize("red dress"));
    }
}
