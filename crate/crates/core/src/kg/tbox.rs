// SPDX-License-Identifier: Apache-2.0

//! Schema axioms, the RDFS-subset closure and the schema (TBox) graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::intern::{ClassId, PredicateId, Vocabulary, THING};
use super::io::{RawTriple, SchemaProperty};
use crate::error::{Error, Result};

/// A schema axiom `(u, l, v)` with `l` drawn from the four supported
/// RDFS properties. The variant fixes which sides are classes and which
/// are properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    SubClassOf(ClassId, ClassId),
    SubPropertyOf(PredicateId, PredicateId),
    Domain(PredicateId, ClassId),
    Range(PredicateId, ClassId),
}

impl Axiom {
    pub fn property(&self) -> SchemaProperty {
        match self {
            Axiom::SubClassOf(..) => SchemaProperty::SubClassOf,
            Axiom::SubPropertyOf(..) => SchemaProperty::SubPropertyOf,
            Axiom::Domain(..) => SchemaProperty::Domain,
            Axiom::Range(..) => SchemaProperty::Range,
        }
    }

    pub fn display(&self, vocab: &Vocabulary) -> String {
        let (u, v) = match *self {
            Axiom::SubClassOf(a, b) => (vocab.class_name(a), vocab.class_name(b)),
            Axiom::SubPropertyOf(a, b) => (vocab.predicate_name(a), vocab.predicate_name(b)),
            Axiom::Domain(p, c) | Axiom::Range(p, c) => (vocab.predicate_name(p), vocab.class_name(c)),
        };
        format!("{u}\t{}\t{v}", self.property().label())
    }
}

/// `(C_t, P_t, L_t, T_t)`; `L_t` is fixed by [`SchemaProperty`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TBoxSpec {
    pub classes: BTreeSet<ClassId>,
    pub properties: BTreeSet<PredicateId>,
    pub axioms: BTreeSet<Axiom>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Role {
    Class,
    Property,
}

impl TBoxSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, axiom: Axiom) {
        match axiom {
            Axiom::SubClassOf(a, b) => {
                self.classes.insert(a);
                self.classes.insert(b);
            }
            Axiom::SubPropertyOf(p, q) => {
                self.properties.insert(p);
                self.properties.insert(q);
            }
            Axiom::Domain(p, c) | Axiom::Range(p, c) => {
                self.properties.insert(p);
                self.classes.insert(c);
            }
        }
        self.axioms.insert(axiom);
    }

    /// Interns schema records. A name used both as a class and as a
    /// property (including ABox predicates already in `vocab`) is rejected.
    pub fn from_records(records: &[RawTriple], vocab: &mut Vocabulary, origin: &str) -> Result<Self> {
        let mut roles: HashMap<String, (Role, usize)> = HashMap::new();
        let mut spec = TBoxSpec::new();
        for rec in records {
            let prop = SchemaProperty::parse(&rec.p).ok_or_else(|| {
                Error::parse(
                    origin,
                    rec.line,
                    format!("`{}` is not one of subClassOf, subPropertyOf, domain, range", rec.p),
                )
            })?;
            let (left, right) = match prop {
                SchemaProperty::SubClassOf => (Role::Class, Role::Class),
                SchemaProperty::SubPropertyOf => (Role::Property, Role::Property),
                SchemaProperty::Domain | SchemaProperty::Range => (Role::Property, Role::Class),
            };
            for (name, role) in [(&rec.s, left), (&rec.o, right)] {
                let prior = roles.get(name.as_str()).map(|&(r, line)| (r, Some(line))).or_else(|| {
                    let as_pred = vocab.predicate_id(name).is_some();
                    let as_class = vocab.class_id(name).is_some();
                    match (as_pred, as_class) {
                        (true, false) => Some((Role::Property, None)),
                        (false, true) => Some((Role::Class, None)),
                        _ => None,
                    }
                });
                if let Some((r, line)) = prior {
                    if r != role {
                        let where_ = line.map(|l| format!("line {l}")).unwrap_or_else(|| "the data".into());
                        return Err(Error::Validation(format!(
                            "{origin}:{}: `{name}` is used as a {:?} but as a {:?} in {where_}",
                            rec.line, role, r
                        )));
                    }
                }
                roles.entry(name.clone()).or_insert((role, rec.line));
            }
            let axiom = match prop {
                SchemaProperty::SubClassOf => Axiom::SubClassOf(vocab.class(&rec.s), vocab.class(&rec.o)),
                SchemaProperty::SubPropertyOf => {
                    Axiom::SubPropertyOf(vocab.predicate(&rec.s), vocab.predicate(&rec.o))
                }
                SchemaProperty::Domain => Axiom::Domain(vocab.predicate(&rec.s), vocab.class(&rec.o)),
                SchemaProperty::Range => Axiom::Range(vocab.predicate(&rec.s), vocab.class(&rec.o)),
            };
            spec.insert(axiom);
        }
        Ok(spec)
    }

    fn annotations(&self, p: PredicateId, range: bool) -> Result<BTreeSet<ClassId>> {
        if !self.properties.contains(&p) {
            return Err(Error::unknown("predicate", p.to_string()));
        }
        let set: BTreeSet<ClassId> = self
            .axioms
            .iter()
            .filter_map(|a| match (*a, range) {
                (Axiom::Domain(q, c), false) if q == p => Some(c),
                (Axiom::Range(q, c), true) if q == p => Some(c),
                _ => None,
            })
            .collect();
        Ok(if set.is_empty() { BTreeSet::from([THING]) } else { set })
    }

    /// Domains of `p` (`{Thing}` when unannotated). Expects a closed spec.
    pub fn domains_of(&self, p: PredicateId) -> Result<BTreeSet<ClassId>> {
        self.annotations(p, false)
    }

    /// Ranges of `p` (`{Thing}` when unannotated). Expects a closed spec.
    pub fn ranges_of(&self, p: PredicateId) -> Result<BTreeSet<ClassId>> {
        self.annotations(p, true)
    }

    pub fn export(&self, vocab: &Vocabulary) -> String {
        let mut lines: Vec<String> = self.axioms.iter().map(|a| a.display(vocab)).collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// Nodes reachable from `start` through at least one edge.
fn reachable<T: Copy + Ord>(start: T, edges: &BTreeMap<T, Vec<T>>) -> BTreeSet<T> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<T> = edges.get(&start).into_iter().flatten().copied().collect();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n) {
            queue.extend(edges.get(&n).into_iter().flatten().copied());
        }
    }
    seen
}

/// Closes the spec under subClassOf / subPropertyOf transitivity and the
/// inheritance of domain and range down the subPropertyOf hierarchy.
/// Cycles are kept: every class on a cycle becomes a subclass of itself.
pub fn rdfs_closure(tbox: &TBoxSpec) -> TBoxSpec {
    let mut sub_class: BTreeMap<ClassId, Vec<ClassId>> = BTreeMap::new();
    let mut sub_prop: BTreeMap<PredicateId, Vec<PredicateId>> = BTreeMap::new();
    let mut domains: BTreeMap<PredicateId, Vec<ClassId>> = BTreeMap::new();
    let mut ranges: BTreeMap<PredicateId, Vec<ClassId>> = BTreeMap::new();
    for a in &tbox.axioms {
        match *a {
            Axiom::SubClassOf(x, y) => sub_class.entry(x).or_default().push(y),
            Axiom::SubPropertyOf(p, q) => sub_prop.entry(p).or_default().push(q),
            Axiom::Domain(p, c) => domains.entry(p).or_default().push(c),
            Axiom::Range(p, c) => ranges.entry(p).or_default().push(c),
        }
    }

    let mut out = tbox.clone();
    for &c in sub_class.keys() {
        for sup in reachable(c, &sub_class) {
            out.axioms.insert(Axiom::SubClassOf(c, sup));
        }
    }
    for &p in tbox.properties.iter() {
        let supers = reachable(p, &sub_prop);
        for &q in &supers {
            out.axioms.insert(Axiom::SubPropertyOf(p, q));
        }
        for q in supers.iter().chain(std::iter::once(&p)) {
            for &c in domains.get(q).into_iter().flatten() {
                out.axioms.insert(Axiom::Domain(p, c));
            }
            for &c in ranges.get(q).into_iter().flatten() {
                out.axioms.insert(Axiom::Range(p, c));
            }
        }
    }
    out
}

/// Closed subclass relation with `Thing` as implicit top.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassHierarchy {
    supers: HashMap<ClassId, BTreeSet<ClassId>>,
}

impl ClassHierarchy {
    pub fn from_closed(tbox: &TBoxSpec) -> Self {
        let mut supers: HashMap<ClassId, BTreeSet<ClassId>> = HashMap::new();
        for a in &tbox.axioms {
            if let Axiom::SubClassOf(x, y) = *a {
                supers.entry(x).or_default().insert(y);
            }
        }
        ClassHierarchy { supers }
    }

    /// `a ⊑* b`, reflexive, with every class below `Thing`.
    pub fn is_subclass_or_eq(&self, a: ClassId, b: ClassId) -> bool {
        a == b || b == THING || self.supers.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Related in either direction of the closed hierarchy.
    pub fn comparable(&self, a: ClassId, b: ClassId) -> bool {
        self.is_subclass_or_eq(a, b) || self.is_subclass_or_eq(b, a)
    }

    /// Entity typing check: untyped entities (or those typed only `Thing`)
    /// pass; otherwise some asserted type must lie below `class`.
    pub fn admits(&self, types: &[ClassId], class: ClassId) -> bool {
        class == THING
            || types.iter().all(|&t| t == THING)
            || types.iter().any(|&t| self.is_subclass_or_eq(t, class))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Property(PredicateId),
    SubClassOf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchemaEdge {
    pub from: ClassId,
    pub label: EdgeLabel,
    pub to: ClassId,
}

/// Schema graph: classes as nodes, each property as a `domain -> range`
/// edge for every pair in `domains(p) x ranges(p)`, plus subClassOf edges.
#[derive(Clone, Debug, Default)]
pub struct TBoxGraph {
    nodes: BTreeSet<ClassId>,
    edges: Vec<SchemaEdge>,
    out_edges: HashMap<ClassId, Vec<usize>>,
    in_edges: HashMap<ClassId, Vec<usize>>,
    domains: BTreeMap<PredicateId, BTreeSet<ClassId>>,
    ranges: BTreeMap<PredicateId, BTreeSet<ClassId>>,
    hierarchy: ClassHierarchy,
}

/// Builds the schema graph of a closed spec. Properties without domain or
/// range annotations use `Thing` on the missing side.
pub fn build_tbox_graph(tbox: &TBoxSpec) -> TBoxGraph {
    let mut nodes: BTreeSet<ClassId> = tbox.classes.clone();
    nodes.insert(THING);
    let mut domains = BTreeMap::new();
    let mut ranges = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for &p in &tbox.properties {
        let ds = tbox.domains_of(p).expect("property is declared");
        let rs = tbox.ranges_of(p).expect("property is declared");
        for &d in &ds {
            for &r in &rs {
                edges.insert(SchemaEdge {
                    from: d,
                    label: EdgeLabel::Property(p),
                    to: r,
                });
            }
        }
        nodes.extend(ds.iter().chain(&rs).copied());
        domains.insert(p, ds);
        ranges.insert(p, rs);
    }
    for a in &tbox.axioms {
        if let Axiom::SubClassOf(x, y) = *a {
            if x != y {
                edges.insert(SchemaEdge {
                    from: x,
                    label: EdgeLabel::SubClassOf,
                    to: y,
                });
            }
        }
    }
    let edges: Vec<SchemaEdge> = edges.into_iter().collect();
    let mut out_edges: HashMap<ClassId, Vec<usize>> = HashMap::new();
    let mut in_edges: HashMap<ClassId, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        out_edges.entry(e.from).or_default().push(i);
        in_edges.entry(e.to).or_default().push(i);
    }
    TBoxGraph {
        nodes,
        edges,
        out_edges,
        in_edges,
        domains,
        ranges,
        hierarchy: ClassHierarchy::from_closed(tbox),
    }
}

impl TBoxGraph {
    pub fn nodes(&self) -> &BTreeSet<ClassId> {
        &self.nodes
    }

    /// All edges in ascending order.
    pub fn edges(&self) -> &[SchemaEdge] {
        &self.edges
    }

    pub fn property_edges(&self) -> impl Iterator<Item = &SchemaEdge> + '_ {
        self.edges
            .iter()
            .filter(|e| matches!(e.label, EdgeLabel::Property(_)))
    }

    pub fn outgoing(&self, c: ClassId) -> impl Iterator<Item = &SchemaEdge> + '_ {
        self.out_edges.get(&c).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn incoming(&self, c: ClassId) -> impl Iterator<Item = &SchemaEdge> + '_ {
        self.in_edges.get(&c).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn properties(&self) -> impl Iterator<Item = PredicateId> + '_ {
        self.domains.keys().copied()
    }

    pub fn domains_of(&self, p: PredicateId) -> Result<&BTreeSet<ClassId>> {
        self.domains.get(&p).ok_or_else(|| Error::unknown("predicate", p.to_string()))
    }

    pub fn ranges_of(&self, p: PredicateId) -> Result<&BTreeSet<ClassId>> {
        self.ranges.get(&p).ok_or_else(|| Error::unknown("predicate", p.to_string()))
    }

    pub fn hierarchy(&self) -> &ClassHierarchy {
        &self.hierarchy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::io::parse_tsv;
    use proptest::prelude::*;

    fn spec(text: &str) -> (Vocabulary, TBoxSpec) {
        let mut v = Vocabulary::new();
        let recs = parse_tsv(text, "schema").unwrap();
        let s = TBoxSpec::from_records(&recs, &mut v, "schema").unwrap();
        (v, s)
    }

    /// Applies one rule instance at a time until nothing changes.
    fn naive_closure(tbox: &TBoxSpec) -> TBoxSpec {
        let mut cur = tbox.clone();
        loop {
            let snapshot: Vec<Axiom> = cur.axioms.iter().copied().collect();
            let mut added = None;
            'search: for a in &snapshot {
                for b in &snapshot {
                    let derived = match (*a, *b) {
                        (Axiom::SubClassOf(x, y), Axiom::SubClassOf(y2, z)) if y == y2 => Axiom::SubClassOf(x, z),
                        (Axiom::SubPropertyOf(x, y), Axiom::SubPropertyOf(y2, z)) if y == y2 => {
                            Axiom::SubPropertyOf(x, z)
                        }
                        (Axiom::SubPropertyOf(q, p), Axiom::Domain(p2, c)) if p == p2 => Axiom::Domain(q, c),
                        (Axiom::SubPropertyOf(q, p), Axiom::Range(p2, c)) if p == p2 => Axiom::Range(q, c),
                        _ => continue,
                    };
                    if !cur.axioms.contains(&derived) {
                        added = Some(derived);
                        break 'search;
                    }
                }
            }
            match added {
                Some(a) => {
                    cur.insert(a);
                }
                None => return cur,
            }
        }
    }

    #[test]
    fn subclass_transitivity() {
        let (v, s) = spec("A\tsubClassOf\tB\nB\tsubClassOf\tC\n");
        let closed = rdfs_closure(&s);
        let a = v.class_id("A").unwrap();
        let c = v.class_id("C").unwrap();
        assert!(closed.axioms.contains(&Axiom::SubClassOf(a, c)));
    }

    #[test]
    fn empty_closure_is_empty() {
        let s = TBoxSpec::new();
        assert_eq!(rdfs_closure(&s), s);
    }

    #[test]
    fn domain_inherits_down_subproperty() {
        let (v, s) = spec("q\tsubPropertyOf\tp\np\tdomain\tC\np\trange\tD\n");
        let closed = rdfs_closure(&s);
        let q = v.predicate_id("q").unwrap();
        let c = v.class_id("C").unwrap();
        let d = v.class_id("D").unwrap();
        assert!(closed.domains_of(q).unwrap().contains(&c));
        assert_eq!(closed.ranges_of(q).unwrap(), BTreeSet::from([d]));
    }

    #[test]
    fn cycles_become_mutual_reachability() {
        let (v, s) = spec("A\tsubClassOf\tB\nB\tsubClassOf\tA\n");
        let closed = rdfs_closure(&s);
        let h = ClassHierarchy::from_closed(&closed);
        let a = v.class_id("A").unwrap();
        let b = v.class_id("B").unwrap();
        assert!(h.is_subclass_or_eq(a, b) && h.is_subclass_or_eq(b, a));
        assert_eq!(rdfs_closure(&closed), closed);
    }

    #[test]
    fn role_conflict_is_a_validation_error() {
        let mut v = Vocabulary::new();
        let recs = parse_tsv("A\tsubClassOf\tB\nA\tdomain\tC\n", "schema").unwrap();
        assert!(matches!(
            TBoxSpec::from_records(&recs, &mut v, "schema"),
            Err(Error::Validation(_))
        ));
        let mut v = Vocabulary::new();
        v.predicate("director");
        let recs = parse_tsv("director\tsubClassOf\tPerson\n", "schema").unwrap();
        assert!(TBoxSpec::from_records(&recs, &mut v, "schema").is_err());
    }

    #[test]
    fn unknown_schema_property_is_rejected() {
        let mut v = Vocabulary::new();
        let recs = parse_tsv("A\tequivalentClass\tB\n", "schema").unwrap();
        assert!(matches!(
            TBoxSpec::from_records(&recs, &mut v, "schema"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn director_edge_and_thing_fallback() {
        let (mut v, mut s) = spec("director\tdomain\tFilm\ndirector\trange\tPerson\n");
        let q = v.predicate("q");
        s.properties.insert(q);
        let closed = rdfs_closure(&s);
        let g = build_tbox_graph(&closed);
        let director = v.predicate_id("director").unwrap();
        let film = v.class_id("Film").unwrap();
        let person = v.class_id("Person").unwrap();
        assert!(g.edges().contains(&SchemaEdge {
            from: film,
            label: EdgeLabel::Property(director),
            to: person
        }));
        assert!(g.edges().contains(&SchemaEdge {
            from: THING,
            label: EdgeLabel::Property(q),
            to: THING
        }));
        assert_eq!(g.domains_of(director).unwrap(), &BTreeSet::from([film]));
        assert_eq!(closed.ranges_of(q).unwrap(), BTreeSet::from([THING]));
        assert!(closed.domains_of(PredicateId(999)).is_err());
    }

    #[test]
    fn cross_product_edges() {
        let (v, s) = spec("p\tdomain\tA\np\tdomain\tB\np\trange\tC\np\trange\tD\n");
        let g = build_tbox_graph(&rdfs_closure(&s));
        let p = v.predicate_id("p").unwrap();
        let count = g
            .edges()
            .iter()
            .filter(|e| e.label == EdgeLabel::Property(p))
            .count();
        assert_eq!(count, 4);
    }

    #[test]
    fn degenerate_spec_yields_thing_only() {
        let g = build_tbox_graph(&TBoxSpec::new());
        assert_eq!(g.nodes(), &BTreeSet::from([THING]));
        assert!(g.edges().is_empty());
    }

    fn arb_spec() -> impl Strategy<Value = TBoxSpec> {
        proptest::collection::vec((0u8..4, 1u32..7, 1u32..7), 0..50).prop_map(|raw| {
            let mut s = TBoxSpec::new();
            for (kind, a, b) in raw {
                s.insert(match kind {
                    0 => Axiom::SubClassOf(ClassId(a), ClassId(b)),
                    1 => Axiom::SubPropertyOf(PredicateId(a), PredicateId(b)),
                    2 => Axiom::Domain(PredicateId(a), ClassId(b)),
                    _ => Axiom::Range(PredicateId(a), ClassId(b)),
                });
            }
            s
        })
    }

    proptest! {
        #[test]
        fn closure_matches_naive_fixpoint(s in arb_spec()) {
            prop_assert_eq!(rdfs_closure(&s), naive_closure(&s));
        }

        #[test]
        fn closure_is_idempotent(s in arb_spec()) {
            let once = rdfs_closure(&s);
            prop_assert_eq!(rdfs_closure(&once), once.clone());
        }

        #[test]
        fn schema_edges_are_sound(s in arb_spec()) {
            let closed = rdfs_closure(&s);
            let g = build_tbox_graph(&closed);
            for e in g.edges() {
                if let EdgeLabel::Property(p) = e.label {
                    prop_assert!(closed.domains_of(p).unwrap().contains(&e.from));
                    prop_assert!(closed.ranges_of(p).unwrap().contains(&e.to));
                }
            }
        }
    }
}
