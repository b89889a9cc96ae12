use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

static ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

pub fn english_stopwords() -> BTreeSet<String> {
    ENGLISH_STOPWORDS.lines().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfidfSpec {
    pub vocab_size: usize,
    pub stopwords: BTreeSet<String>,
    pub lowercase: bool,
}

impl Default for TfidfSpec {
    fn default() -> Self {
        TfidfSpec {
            vocab_size: 1000,
            stopwords: english_stopwords(),
            lowercase: true,
        }
    }
}

/// Splits on anything that is not alphanumeric.
pub fn tokenize<'a>(text: &'a str, spec: &'a TfidfSpec) -> impl Iterator<Item = String> + 'a {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(move |t| if spec.lowercase { t.to_lowercase() } else { t.to_owned() })
        .filter(move |t| !spec.stopwords.contains(t))
}

/// Fitted vocabulary (sorted) with smoothed idf weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TfidfVectorizer {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    spec: TfidfSpec,
}

impl TfidfVectorizer {
    /// Keeps the `vocab_size` terms with the highest document frequency,
    /// ties going to the lexicographically smaller term.
    pub fn fit<S: AsRef<str>>(corpus: &[S], spec: &TfidfSpec) -> Result<TfidfVectorizer> {
        if spec.vocab_size == 0 {
            return Err(Error::InvalidConfig("vocab_size must be at least 1".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let terms: BTreeSet<String> = tokenize(doc.as_ref(), spec).collect();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(spec.vocab_size);
        ranked.sort();

        let n = corpus.len() as f64;
        let idf = ranked
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        let vocabulary: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TfidfVectorizer {
            vocabulary,
            idf,
            index,
            spec: spec.clone(),
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Raw counts times idf, L2-normalised. Documents with no vocabulary
    /// terms map to the zero vector.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.vocabulary.len()];
        for t in tokenize(text, &self.spec) {
            if let Some(&j) = self.index.get(&t) {
                v[j] += 1.0;
            }
        }
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}
