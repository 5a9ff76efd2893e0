//! Vocabularies, triple ingestion and the known-fact index.
//!
//! Datasets use the common benchmark layout: a directory with `train.txt`,
//! `valid.txt` and `test.txt`, one `subject<TAB>relation<TAB>object` triple
//! per line. Only the training split may introduce new labels.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Suffix appended to a relation label to name its inverse.
pub const INVERSE_SUFFIX: &str = "#inv";

/// An integer-encoded fact `(subject, object, relation)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: usize,
    pub object: usize,
    pub relation: usize,
}

impl Triple {
    pub const fn new(subject: usize, object: usize, relation: usize) -> Self {
        Self {
            subject,
            object,
            relation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Dense label <-> index maps for entities and relations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    entity_ids: HashMap<String, usize>,
    entities: Vec<String>,
    relation_ids: HashMap<String, usize>,
    relations: Vec<String>,
    /// Number of original relations once inverses were appended.
    base_relations: Option<usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity(&self, index: usize) -> Option<&str> {
        self.entities.get(index).map(String::as_str)
    }

    pub fn relation(&self, index: usize) -> Option<&str> {
        self.relations.get(index).map(String::as_str)
    }

    pub fn entity_index(&self, label: &str) -> Option<usize> {
        self.entity_ids.get(label).copied()
    }

    pub fn relation_index(&self, label: &str) -> Option<usize> {
        self.relation_ids.get(label).copied()
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn intern_entity(&mut self, label: &str) -> usize {
        intern(&mut self.entity_ids, &mut self.entities, label)
    }

    pub fn intern_relation(&mut self, label: &str) -> usize {
        intern(&mut self.relation_ids, &mut self.relations, label)
    }

    pub fn is_augmented(&self) -> bool {
        self.base_relations.is_some()
    }

    /// Index of the paired inverse relation, when inverses exist.
    pub fn inverse(&self, relation: usize) -> Option<usize> {
        let base = self.base_relations?;
        if relation >= 2 * base {
            None
        } else if relation < base {
            Some(relation + base)
        } else {
            Some(relation - base)
        }
    }
}

fn intern(ids: &mut HashMap<String, usize>, labels: &mut Vec<String>, label: &str) -> usize {
    if let Some(&id) = ids.get(label) {
        return id;
    }
    let id = labels.len();
    ids.insert(label.to_owned(), id);
    labels.push(label.to_owned());
    id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    /// Drop the line and log a warning.
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    /// Keep the first occurrence and log a warning.
    Dedup,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub unknown: UnknownPolicy,
    pub duplicates: DuplicatePolicy,
}

/// Read a triple file. With `frozen` set, labels missing from `vocab` are
/// handled by `options.unknown`; otherwise they are added.
pub fn load_triples(
    path: &Path,
    vocab: &mut Vocab,
    frozen: bool,
    options: LoadOptions,
) -> Result<Vec<Triple>> {
    let file = File::open(path)?;
    read_triples(BufReader::new(file), path, vocab, frozen, options)
}

pub fn read_triples<R: BufRead>(
    reader: R,
    source: &Path,
    vocab: &mut Vocab,
    frozen: bool,
    options: LoadOptions,
) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: source.to_owned(),
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (s, r, o) = (fields[0], fields[1], fields[2]);

        let triple = if frozen {
            let lookup = [
                ("entity", s, vocab.entity_index(s)),
                ("relation", r, vocab.relation_index(r)),
                ("entity", o, vocab.entity_index(o)),
            ];
            if let Some((kind, label, _)) = lookup.iter().find(|(_, _, id)| id.is_none()) {
                match options.unknown {
                    UnknownPolicy::Skip => {
                        log::warn!(
                            "{}:{}: skipping triple with unknown {} `{}`",
                            source.display(),
                            line_no,
                            kind,
                            label
                        );
                        continue;
                    }
                    UnknownPolicy::Error => {
                        return Err(Error::UnknownLabel {
                            path: source.to_owned(),
                            line: line_no,
                            kind,
                            label: (*label).to_owned(),
                        })
                    }
                }
            }
            Triple::new(lookup[0].2.unwrap(), lookup[2].2.unwrap(), lookup[1].2.unwrap())
        } else {
            let subject = vocab.intern_entity(s);
            let relation = vocab.intern_relation(r);
            let object = vocab.intern_entity(o);
            Triple::new(subject, object, relation)
        };

        if !seen.insert(triple) {
            match options.duplicates {
                DuplicatePolicy::Dedup => {
                    log::warn!("{}:{}: dropping duplicate triple", source.display(), line_no);
                    continue;
                }
                DuplicatePolicy::Reject => {
                    return Err(Error::DuplicateTriple {
                        path: source.to_owned(),
                        line: line_no,
                        subject: s.to_owned(),
                        relation: r.to_owned(),
                        object: o.to_owned(),
                    })
                }
            }
        }
        triples.push(triple);
    }
    Ok(triples)
}

/// Write triples back out in the tab-separated line format.
pub fn write_triples<W: Write>(mut out: W, triples: &[Triple], vocab: &Vocab) -> Result<()> {
    for t in triples {
        let label = |what, v: Option<&str>, index| {
            v.map(str::to_owned).ok_or(Error::IndexOutOfBounds {
                what,
                index,
                bound: 0,
            })
        };
        writeln!(
            out,
            "{}\t{}\t{}",
            label("entity", vocab.entity(t.subject), t.subject)?,
            label("relation", vocab.relation(t.relation), t.relation)?,
            label("entity", vocab.entity(t.object), t.object)?,
        )?;
    }
    Ok(())
}

pub fn save_triples(path: &Path, triples: &[Triple], vocab: &Vocab) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_triples(&mut out, triples, vocab)?;
    out.flush()?;
    Ok(())
}

/// Train/valid/test triples plus the indexes used for filtering and
/// negative sampling. Immutable once built.
#[derive(Debug, Clone)]
pub struct TripleStore {
    n_entities: usize,
    n_relations: usize,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    known: HashSet<Triple>,
    train_set: HashSet<Triple>,
    objects_of: HashMap<(usize, usize), Vec<usize>>,
    subjects_of: HashMap<(usize, usize), Vec<usize>>,
    augmented: bool,
}

impl TripleStore {
    pub fn new(
        n_entities: usize,
        n_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        Self::build(n_entities, n_relations, train, valid, test, false)
    }

    fn build(
        n_entities: usize,
        n_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
        augmented: bool,
    ) -> Result<Self> {
        let mut known = HashSet::new();
        let mut objects_of: HashMap<_, Vec<usize>> = HashMap::new();
        let mut subjects_of: HashMap<_, Vec<usize>> = HashMap::new();
        for (name, split) in [("train", &train), ("valid", &valid), ("test", &test)] {
            let mut seen = HashSet::with_capacity(split.len());
            for &t in split {
                check_bounds(t, n_entities, n_relations)?;
                if !seen.insert(t) {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate triple {t:?} in {name} split"
                    )));
                }
                if known.insert(t) {
                    objects_of
                        .entry((t.subject, t.relation))
                        .or_default()
                        .push(t.object);
                    subjects_of
                        .entry((t.object, t.relation))
                        .or_default()
                        .push(t.subject);
                }
            }
        }
        let train_set = train.iter().copied().collect();
        Ok(Self {
            n_entities,
            n_relations,
            train,
            valid,
            test,
            known,
            train_set,
            objects_of,
            subjects_of,
            augmented,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    /// Membership in the union of all splits, with bounds checking.
    pub fn is_known_fact(&self, subject: usize, object: usize, relation: usize) -> Result<bool> {
        let t = Triple::new(subject, object, relation);
        check_bounds(t, self.n_entities, self.n_relations)?;
        Ok(self.known.contains(&t))
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.known.contains(t)
    }

    pub fn is_train_fact(&self, t: &Triple) -> bool {
        self.train_set.contains(t)
    }

    pub fn known_len(&self) -> usize {
        self.known.len()
    }

    /// Objects `o` with `(subject, o, relation)` known in any split.
    pub fn known_objects(&self, subject: usize, relation: usize) -> &[usize] {
        self.objects_of
            .get(&(subject, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Subjects `s` with `(s, object, relation)` known in any split.
    pub fn known_subjects(&self, object: usize, relation: usize) -> &[usize] {
        self.subjects_of
            .get(&(object, relation))
            .map_or(&[], Vec::as_slice)
    }
}

fn check_bounds(t: Triple, n_entities: usize, n_relations: usize) -> Result<()> {
    for (what, index, bound) in [
        ("subject", t.subject, n_entities),
        ("object", t.object, n_entities),
        ("relation", t.relation, n_relations),
    ] {
        if index >= bound {
            return Err(Error::IndexOutOfBounds { what, index, bound });
        }
    }
    Ok(())
}

/// Add `(o, s, r#inv)` for every training triple `(s, o, r)`. Relation
/// `k` is paired with `k + N_r`; valid and test are left untouched.
pub fn augment_inverse(store: &TripleStore, vocab: &Vocab) -> Result<(TripleStore, Vocab)> {
    if store.augmented || vocab.is_augmented() {
        return Err(Error::AlreadyAugmented);
    }
    if vocab.n_relations() != store.n_relations {
        return Err(Error::ShapeMismatch {
            what: "relation count",
            expected: store.n_relations,
            found: vocab.n_relations(),
        });
    }
    let base = store.n_relations;
    let mut vocab = vocab.clone();
    for k in 0..base {
        let label = format!("{}{}", vocab.relations[k], INVERSE_SUFFIX);
        let id = vocab.intern_relation(&label);
        if id != k + base {
            return Err(Error::InvalidConfig(format!(
                "relation label `{label}` collides with an existing relation"
            )));
        }
    }
    vocab.base_relations = Some(base);

    let mut train = store.train.clone();
    train.extend(
        store
            .train
            .iter()
            .map(|t| Triple::new(t.object, t.subject, t.relation + base)),
    );
    let store = TripleStore::build(
        store.n_entities,
        2 * base,
        train,
        store.valid.clone(),
        store.test.clone(),
        true,
    )?;
    Ok((store, vocab))
}

/// Load `train.txt` (required), `valid.txt` and `test.txt` (optional) from
/// a dataset directory, growing the vocabulary from the training split.
pub fn load_dataset(dir: &Path, options: LoadOptions) -> Result<(Vocab, TripleStore)> {
    let train_path = dir.join("train.txt");
    if !train_path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found", train_path.display()),
        )));
    }
    let mut vocab = Vocab::new();
    let train = load_triples(&train_path, &mut vocab, false, options)?;
    let mut load_frozen = |name: &str| -> Result<Vec<Triple>> {
        let path = dir.join(name);
        if path.is_file() {
            load_triples(&path, &mut vocab, true, options)
        } else {
            Ok(Vec::new())
        }
    };
    let valid = load_frozen("valid.txt")?;
    let test = load_frozen("test.txt")?;
    let store = TripleStore::new(
        vocab.n_entities(),
        vocab.n_relations(),
        train,
        valid,
        test,
    )?;
    Ok((vocab, store))
}
