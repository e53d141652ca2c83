//! Combination-granularity expressions and the datasets they generate.
//!
//! `*` fuses modalities of one scene into a single sample, `+` takes the
//! union of independently built sample sets. `*` binds tighter than `+`, so
//! `M*V+S` is one fused multi-image/video sample per scene plus one sample
//! per static image.
//!
//! A bare `S` term yields one sample per static image. Inside a fused term
//! `S` contributes all key-frame images of the scene to that scene's sample.
//! Parts follow the order the expression is written in: `S*V` places the
//! statics before the clip, `V*S` after it. The spellings used for the
//! reference datasets are `S`, `M`, `V`, `S*M`, `S*V`, `M*V`, `S*M*V`,
//! `S+M`, `M*V+S`, `S*V+M` and `S*V+M*V`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::modal::{Corpus, FrameRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    /// Static image.
    S,
    /// Multi-image key-frame sequence.
    M,
    /// Video clip.
    V,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::S, Modality::M, Modality::V];

    pub fn symbol(self) -> char {
        match self {
            Modality::S => 'S',
            Modality::M => 'M',
            Modality::V => 'V',
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Modalities fused into one sample, in part order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term(Vec<Modality>);

impl Term {
    pub fn new(mods: Vec<Modality>) -> Result<Self> {
        if mods.is_empty() {
            return Err(domain("empty term"));
        }
        for (i, m) in mods.iter().enumerate() {
            if mods[..i].contains(m) {
                return Err(domain(format!("modality {m} repeated within one term")));
            }
        }
        Ok(Self(mods))
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.0
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.0.contains(&m)
    }

    /// A lone `S` expands to one sample per static image.
    pub fn is_bare_static(&self) -> bool {
        self.0 == [Modality::S]
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GranularityExpr {
    terms: Vec<Term>,
}

impl GranularityExpr {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(domain("expression without terms"));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Order-insensitive key: `S*V*M` and `M*S*V` compare equal, as do `S+M` and `M+S`.
    pub fn normalized(&self) -> Vec<Vec<Modality>> {
        let mut terms: Vec<Vec<Modality>> = self
            .terms
            .iter()
            .map(|t| {
                let mut m = t.0.clone();
                m.sort();
                m
            })
            .collect();
        terms.sort();
        terms
    }
}

impl fmt::Display for GranularityExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for GranularityExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

/// `expr := term ('+' term)*`, `term := mod ('*' mod)*`, `mod := S | M | V`.
/// Whitespace is ignored; errors carry the byte offset of the offending character.
pub fn parse_expr(text: &str) -> Result<GranularityExpr> {
    let tokens: Vec<(usize, char)> = text.char_indices().filter(|(_, c)| !c.is_whitespace()).collect();
    let syntax = |offset: usize, message: String| Error::Syntax { offset, message };
    if tokens.is_empty() {
        return Err(syntax(text.len(), "empty expression".into()));
    }

    let mut terms = Vec::new();
    let mut current: Vec<Modality> = Vec::new();
    let mut expect_mod = true;
    for &(offset, c) in &tokens {
        if expect_mod {
            let m = match c {
                'S' => Modality::S,
                'M' => Modality::M,
                'V' => Modality::V,
                _ => return Err(syntax(offset, format!("expected S, M or V, found {c:?}"))),
            };
            if current.contains(&m) {
                return Err(syntax(offset, format!("modality {m} repeated within one term")));
            }
            current.push(m);
            expect_mod = false;
        } else {
            match c {
                '*' => {}
                '+' => terms.push(Term(std::mem::take(&mut current))),
                _ => return Err(syntax(offset, format!("expected '*' or '+', found {c:?}"))),
            }
            expect_mod = true;
        }
    }
    if expect_mod {
        return Err(syntax(text.len(), "expression ends with an operator".into()));
    }
    terms.push(Term(current));
    Ok(GranularityExpr { terms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MediaPart {
    Static(FrameRef),
    MultiImage(Vec<FrameRef>),
    /// The whole clip, every frame in order.
    Video(Vec<FrameRef>),
}

impl MediaPart {
    pub fn kind(&self) -> &'static str {
        match self {
            MediaPart::Static(_) => "static",
            MediaPart::MultiImage(_) => "multi_image",
            MediaPart::Video(_) => "video",
        }
    }

    pub fn frames(&self) -> Vec<&FrameRef> {
        match self {
            MediaPart::Static(f) => vec![f],
            MediaPart::MultiImage(fs) | MediaPart::Video(fs) => fs.iter().collect(),
        }
    }

    pub fn scene_id(&self) -> Option<&str> {
        self.frames().first().map(|f| f.scene_id.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub scene_id: String,
    /// Text of the term (or window) that produced the sample.
    pub term: String,
    pub parts: Vec<MediaPart>,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermCount {
    pub term: String,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// Canonical expression text, or `window:<w>` for sliding-window sets.
    pub expr: String,
    pub samples: Vec<Sample>,
    pub provenance: Vec<TermCount>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples for one term, in scene order and, for a bare `S`, frame order.
pub fn fuse_term(term: &Term, term_index: usize, corpus: &Corpus) -> Result<Vec<Sample>> {
    let by_scene = corpus.statics_by_scene();
    if term.is_bare_static() {
        let mut out = Vec::with_capacity(corpus.statics.len());
        for v in &corpus.videos {
            let statics = by_scene.get(v.scene_id.as_str()).filter(|s| !s.is_empty()).ok_or_else(|| {
                Error::MissingModality { scene: v.scene_id.clone(), modality: 'S' }
            })?;
            for s in statics {
                out.push(Sample {
                    id: format!("{term_index}:{term}:{}:{}", v.scene_id, s.global_index),
                    scene_id: v.scene_id.clone(),
                    term: term.to_string(),
                    parts: vec![MediaPart::Static(s.frame.clone())],
                    target: s.label.clone(),
                });
            }
        }
        return Ok(out);
    }

    let mut out = Vec::with_capacity(corpus.videos.len());
    for v in &corpus.videos {
        let mut parts = Vec::new();
        for m in term.modalities() {
            match m {
                Modality::S => {
                    let statics = by_scene.get(v.scene_id.as_str()).filter(|s| !s.is_empty()).ok_or_else(|| {
                        Error::MissingModality { scene: v.scene_id.clone(), modality: 'S' }
                    })?;
                    parts.extend(statics.iter().map(|s| MediaPart::Static(s.frame.clone())));
                }
                Modality::M => {
                    let multi = corpus
                        .multi(&v.scene_id)
                        .ok_or_else(|| Error::MissingModality { scene: v.scene_id.clone(), modality: 'M' })?;
                    parts.push(MediaPart::MultiImage(multi.frames.clone()));
                }
                Modality::V => parts.push(MediaPart::Video(v.frames.clone())),
            }
        }
        out.push(Sample {
            id: format!("{term_index}:{term}:{}", v.scene_id),
            scene_id: v.scene_id.clone(),
            term: term.to_string(),
            parts,
            target: v.scene_label(),
        });
    }
    Ok(out)
}

/// Union of the per-term sample sets, in term order.
pub fn build_dataset(expr: &GranularityExpr, corpus: &Corpus) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut provenance = Vec::with_capacity(expr.terms().len());
    for (i, term) in expr.terms().iter().enumerate() {
        let part = fuse_term(term, i, corpus)?;
        provenance.push(TermCount { term: term.to_string(), samples: part.len() });
        samples.extend(part);
    }
    Ok(Dataset { name: expr.to_string(), expr: expr.to_string(), samples, provenance })
}

/// Windows of `w` consecutive key frames per scene, labelled with the
/// instruction of the window's last frame. `w = 1` reproduces the statics.
pub fn sliding_windows(corpus: &Corpus, w: usize) -> Result<Dataset> {
    if w < 1 {
        return Err(domain("window length must be at least 1"));
    }
    let mut samples = Vec::new();
    let term = format!("window:{w}");
    for m in &corpus.multis {
        let k = m.frames.len();
        if k < w {
            continue;
        }
        for start in 0..=k - w {
            let frames = &m.frames[start..start + w];
            let part = if w == 1 {
                MediaPart::Static(frames[0].clone())
            } else {
                MediaPart::MultiImage(frames.to_vec())
            };
            samples.push(Sample {
                id: format!("{term}:{}:{start}", m.scene_id),
                scene_id: m.scene_id.clone(),
                term: term.clone(),
                parts: vec![part],
                target: m.labels[start + w - 1].clone(),
            });
        }
    }
    let provenance = vec![TermCount { term: term.clone(), samples: samples.len() }];
    Ok(Dataset { name: term.clone(), expr: term, samples, provenance })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartRecord {
    pub kind: String,
    pub refs: Vec<String>,
}

/// One line of a serialized dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub expr: String,
    pub scene: String,
    pub parts: Vec<PartRecord>,
    pub target: String,
}

/// The minimal single-image record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInstruction {
    pub image: String,
    pub instruction: String,
}

impl SampleRecord {
    pub fn from_sample(sample: &Sample, expr: &str) -> Self {
        Self {
            id: sample.id.clone(),
            expr: expr.to_string(),
            scene: sample.scene_id.clone(),
            parts: sample
                .parts
                .iter()
                .map(|p| PartRecord {
                    kind: p.kind().to_string(),
                    refs: p.frames().iter().map(|f| f.content.clone()).collect(),
                })
                .collect(),
            target: sample.target.clone(),
        }
    }
}

pub fn write_dataset<W: Write>(mut writer: W, dataset: &Dataset) -> Result<()> {
    for s in &dataset.samples {
        serde_json::to_writer(&mut writer, &SampleRecord::from_sample(s, &dataset.expr))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<SampleRecord>> {
    read_jsonl(reader)
}

pub(crate) fn read_jsonl<R: BufRead, T: serde::de::DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format { line: n + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Cardinality a term must produce on `corpus`.
pub fn term_cardinality(term: &Term, corpus: &Corpus) -> usize {
    if term.is_bare_static() {
        corpus.statics.len()
    } else {
        corpus.scene_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{SceneFeatures, VideoSample};

    fn corpus(ks: &[usize]) -> Corpus {
        let vids = ks
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                let id = format!("s{n}");
                let frames = (0..k as u32 + 2).map(|i| FrameRef::new(&id, i, i as f64, format!("{id}/{i}"))).collect();
                let keys = (1..=k as u32).collect();
                let labels = (0..k).map(|i| format!("{id} a{i}")).collect();
                VideoSample::new(&id, frames, keys, SceneFeatures::new([id.clone()]), labels).unwrap()
            })
            .collect();
        Corpus::decompose(vids).unwrap()
    }

    fn p(s: &str) -> GranularityExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn parses_reference_spellings() {
        use Modality::*;
        assert_eq!(p("M*V+S").terms(), &[Term(vec![M, V]), Term(vec![S])]);
        assert_eq!(p("S").terms(), &[Term(vec![S])]);
        assert_eq!(p("S*V+M*V").terms(), &[Term(vec![S, V]), Term(vec![M, V])]);
        assert_eq!(p(" M * V +\tS ").to_string(), "M*V+S");
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_expr("M*X") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
        match parse_expr("S*S") {
            Err(Error::Syntax { offset, message }) => {
                assert_eq!(offset, 2);
                assert!(message.contains("repeated"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expr("S+") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("").is_err());
        assert!(parse_expr("SM").is_err());
        assert!(parse_expr("S**M").is_err());
    }

    #[test]
    fn normalized_ignores_order() {
        assert_eq!(p("S*V*M").normalized(), p("M*S*V").normalized());
        assert_eq!(p("S+M*V").normalized(), p("V*M+S").normalized());
        assert_ne!(p("S*V+M").normalized(), p("M*V+S").normalized());
    }

    #[test]
    fn fused_parts_follow_term_order() {
        let c = corpus(&[3, 4, 5]);
        let d = build_dataset(&p("S*M*V"), &c).unwrap();
        assert_eq!(d.len(), 3);
        for (sample, k) in d.samples.iter().zip([3, 4, 5]) {
            assert_eq!(sample.parts.len(), k + 2);
            assert!(sample.parts[..k].iter().all(|p| matches!(p, MediaPart::Static(_))));
            assert!(matches!(sample.parts[k], MediaPart::MultiImage(_)));
            assert!(matches!(sample.parts[k + 1], MediaPart::Video(_)));
        }
        let d = build_dataset(&p("V*S"), &c).unwrap();
        assert!(matches!(d.samples[0].parts[0], MediaPart::Video(_)));
    }

    #[test]
    fn mixing_cardinality() {
        let c = corpus(&[3, 4, 5]);
        assert_eq!(build_dataset(&p("S"), &c).unwrap().len(), 12);
        assert_eq!(build_dataset(&p("M*V+S"), &c).unwrap().len(), 15);
        let d = build_dataset(&p("S*V+M*V"), &c).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.provenance, vec![
            TermCount { term: "S*V".into(), samples: 3 },
            TermCount { term: "M*V".into(), samples: 3 }
        ]);
    }

    #[test]
    fn missing_modality_names_scene() {
        let mut c = corpus(&[3, 3]);
        c.multis.remove(1);
        match build_dataset(&p("M*V"), &c) {
            Err(Error::MissingModality { scene, modality }) => {
                assert_eq!(scene, "s1");
                assert_eq!(modality, 'M');
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn windows() {
        let c = corpus(&[6]);
        let d = sliding_windows(&c, 2).unwrap();
        assert_eq!(d.len(), 5);
        let refs: Vec<Vec<&str>> = d
            .samples
            .iter()
            .map(|s| s.parts[0].frames().iter().map(|f| f.content.as_str()).collect())
            .collect();
        assert_eq!(refs[0], vec!["s0/1", "s0/2"]);
        assert_eq!(refs[4], vec!["s0/5", "s0/6"]);
        assert_eq!(d.samples[0].target, "s0 a1");
        assert_eq!(sliding_windows(&c, 6).unwrap().len(), 1);
        assert_eq!(sliding_windows(&c, 7).unwrap().len(), 0);
        assert!(sliding_windows(&c, 0).is_err());

        let ones = sliding_windows(&c, 1).unwrap();
        let statics = build_dataset(&p("S"), &c).unwrap();
        assert_eq!(ones.len(), statics.len());
        for (a, b) in ones.samples.iter().zip(&statics.samples) {
            assert_eq!(a.parts, b.parts);
            assert_eq!(a.target, b.target);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let c = corpus(&[3, 4]);
        let d = build_dataset(&p("M*V+S"), &c).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let records = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(records.len(), d.len());
        let mut again = Vec::new();
        for r in &records {
            serde_json::to_writer(&mut again, r).unwrap();
            again.push(b'\n');
        }
        assert_eq!(again, buf);
    }
}
