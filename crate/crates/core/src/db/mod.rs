//! OCB database: classes, typed class references, objects, object references
//! with locality, and back-references.
//!
//! Generation runs in three steps: [`generate_schema`] instantiates the class
//! metaclass, [`check_consistency`] strips cycles out of the reference types
//! that forbid them, and [`instantiate_objects`] creates the object graph.

mod file;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClassId, Oid, RefType};
use crate::rng::{self, SimRng};

pub use file::{read_database, write_database, DB_FORMAT_VERSION};

/// Redraws allowed when a class reference lands on its owner.
const SELF_REF_RETRIES: usize = 16;

/// Upper bound (exclusive) for generated integer attribute values.
const ATTRIBUTE_RANGE: i32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaParams {
    pub nc: u32,
    pub maxnref: u32,
    pub basesize: u32,
    pub no: u32,
    pub nreft: u8,
    pub attrange: u32,
    pub clocref: u32,
    pub olocref: u32,
    /// Per-class MAXNREF(i). When absent each class draws uniformly in `[1, maxnref]`.
    #[serde(default)]
    pub maxnref_table: Option<Vec<u32>>,
    /// Per-class BASESIZE(i). When absent every class uses `basesize`.
    #[serde(default)]
    pub basesize_table: Option<Vec<u32>>,
}

impl Default for SchemaParams {
    /// OCB defaults: 50 classes, 20,000 objects, windows spanning everything.
    fn default() -> Self {
        SchemaParams {
            nc: 50,
            maxnref: 10,
            basesize: 50,
            no: 20_000,
            nreft: 4,
            attrange: 1,
            clocref: 50,
            olocref: 20_000,
            maxnref_table: None,
            basesize_table: None,
        }
    }
}

impl SchemaParams {
    /// Defaults with `clocref = nc` and `olocref = no` kept in step.
    pub fn with_counts(nc: u32, no: u32) -> Self {
        SchemaParams {
            nc,
            no,
            clocref: nc,
            olocref: no,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nc < 1 {
            return Err(Error::param("NC must be at least 1"));
        }
        if self.no < 1 {
            return Err(Error::param("NO must be at least 1"));
        }
        if self.nreft < 1 {
            return Err(Error::param("NREFT must be at least 1"));
        }
        if self.clocref < 1 || self.clocref > self.nc {
            return Err(Error::param(format!(
                "CLOCREF must lie in [1, NC={}], got {}",
                self.nc, self.clocref
            )));
        }
        if self.olocref < 1 || self.olocref > self.no {
            return Err(Error::param(format!(
                "OLOCREF must lie in [1, NO={}], got {}",
                self.no, self.olocref
            )));
        }
        for (name, table) in [
            ("MAXNREF", &self.maxnref_table),
            ("BASESIZE", &self.basesize_table),
        ] {
            if let Some(t) = table {
                if t.len() != self.nc as usize {
                    return Err(Error::param(format!(
                        "per-class {name} table has {} entries, expected NC={}",
                        t.len(),
                        self.nc
                    )));
                }
            }
        }
        Ok(())
    }

    fn class_maxnref(&self, class: usize, rng: &mut SimRng) -> u32 {
        match &self.maxnref_table {
            Some(t) => t[class],
            None if self.maxnref == 0 => 0,
            None => rng.gen_range(1..=self.maxnref),
        }
    }

    fn class_basesize(&self, class: usize) -> u32 {
        match &self.basesize_table {
            Some(t) => t[class],
            None => self.basesize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ref<T> {
    pub target: T,
    pub ref_type: RefType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class_id: ClassId,
    pub maxnref: u32,
    pub basesize: u32,
    pub crefs: Vec<Ref<ClassId>>,
    pub instance_size: u32,
    /// Member OIDs in ascending order.
    pub iterator: Vec<Oid>,
}

impl ClassSpec {
    /// `basesize × (1 + |crefs|)`.
    pub fn computed_instance_size(&self) -> u32 {
        self.basesize * (1 + self.crefs.len() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub oid: Oid,
    pub class_id: ClassId,
    pub orefs: Vec<Ref<Oid>>,
    /// Referring objects, with the type of the reference they hold. One entry
    /// per incoming reference, so duplicates mirror duplicate orefs.
    pub backrefs: Vec<Ref<Oid>>,
    pub attributes: Vec<i32>,
    pub filler_size: u32,
    pub deleted: bool,
}

/// Size in bytes of an object: its class's `InstanceSize`.
pub fn object_size(obj: &ObjectInstance) -> u32 {
    obj.filler_size
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    pub params: SchemaParams,
    pub classes: Vec<ClassSpec>,
    pub objects: Vec<ObjectInstance>,
    pub rng_seed: u64,
}

/// Step 1: instantiate NC classes and draw their class-level references.
pub fn generate_schema(params: &SchemaParams, seed: u64) -> Result<Vec<ClassSpec>> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[rng::label("schema")]);
    let nc = params.nc as i64;
    let window = params.clocref as i64;

    let mut classes = Vec::with_capacity(params.nc as usize);
    for c in 0..params.nc as usize {
        let maxnref = params.class_maxnref(c, &mut rng);
        let lo = (c as i64 - window).max(0);
        let hi = (c as i64 + window).min(nc - 1);
        let mut crefs = Vec::with_capacity(maxnref as usize);
        for _ in 0..maxnref {
            let ref_type = RefType(rng.gen_range(0..params.nreft));
            let mut target = None;
            for _ in 0..SELF_REF_RETRIES {
                let t = rng.gen_range(lo..=hi);
                if t != c as i64 {
                    target = Some(t);
                    break;
                }
            }
            if let Some(t) = target {
                crefs.push(Ref {
                    target: ClassId(t as u32),
                    ref_type,
                });
            }
        }
        let mut spec = ClassSpec {
            class_id: ClassId(c as u32),
            maxnref,
            basesize: params.class_basesize(c),
            crefs,
            instance_size: 0,
            iterator: Vec::new(),
        };
        spec.instance_size = spec.computed_instance_size();
        classes.push(spec);
    }
    Ok(classes)
}

/// The reference types whose graphs must stay acyclic.
pub fn default_acyclic_types() -> BTreeSet<RefType> {
    [RefType::INHERITANCE, RefType::COMPOSITION].into()
}

/// Step 2: remove every class reference that would close a cycle in the
/// subgraph of its (acyclic) type. Edges are admitted in class/slot order;
/// an edge is dropped when its target already reaches its source. Edges of
/// other types are untouched.
pub fn check_consistency(
    mut classes: Vec<ClassSpec>,
    acyclic_types: &BTreeSet<RefType>,
) -> Vec<ClassSpec> {
    let n = classes.len();
    for &ty in acyclic_types {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in 0..n {
            let mut kept = Vec::with_capacity(classes[c].crefs.len());
            for r in classes[c].crefs.iter().copied() {
                if r.ref_type != ty {
                    kept.push(r);
                    continue;
                }
                let t = r.target.index();
                if t >= n || t == c || reaches(&adj, t, c) {
                    continue;
                }
                adj[c].push(t);
                kept.push(r);
            }
            classes[c].crefs = kept;
        }
    }
    for class in &mut classes {
        class.instance_size = class.computed_instance_size();
    }
    classes
}

fn reaches(adj: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if std::mem::replace(&mut seen[u], true) {
            continue;
        }
        stack.extend(adj[u].iter().copied().filter(|&v| !seen[v]));
    }
    false
}

/// Step 3: create NO objects, assign them uniformly to classes and draw one
/// object reference per class reference, inside the OLOCREF window.
pub fn instantiate_objects(
    mut classes: Vec<ClassSpec>,
    params: &SchemaParams,
    seed: u64,
) -> Result<Database> {
    params.validate()?;
    if classes.len() != params.nc as usize {
        return Err(Error::param(format!(
            "{} classes supplied for NC={}",
            classes.len(),
            params.nc
        )));
    }
    let mut rng = rng::stream(seed, &[rng::label("objects")]);
    let no = params.no as usize;

    let class_of: Vec<ClassId> = (0..no)
        .map(|_| ClassId(rng.gen_range(0..params.nc)))
        .collect();
    for class in &mut classes {
        class.iterator.clear();
    }
    for (oid, c) in class_of.iter().enumerate() {
        classes[c.index()].iterator.push(Oid(oid as u32));
    }

    let mut objects: Vec<ObjectInstance> = class_of
        .iter()
        .enumerate()
        .map(|(oid, &c)| {
            let class = &classes[c.index()];
            ObjectInstance {
                oid: Oid(oid as u32),
                class_id: c,
                orefs: Vec::with_capacity(class.crefs.len()),
                backrefs: Vec::new(),
                attributes: (0..params.attrange)
                    .map(|_| rng.gen_range(0..ATTRIBUTE_RANGE))
                    .collect(),
                filler_size: class.instance_size,
                deleted: false,
            }
        })
        .collect();

    for oid in 0..no {
        let class = &classes[class_of[oid].index()];
        let mut orefs = Vec::with_capacity(class.crefs.len());
        for cref in &class.crefs {
            let members = &classes[cref.target.index()].iterator;
            if let Some(t) = pick_in_window(members, oid, params.olocref, no, &mut rng) {
                orefs.push(Ref {
                    target: t,
                    ref_type: cref.ref_type,
                });
            }
        }
        objects[oid].orefs = orefs;
    }
    install_backrefs(&mut objects);

    Ok(Database {
        params: params.clone(),
        classes,
        objects,
        rng_seed: seed,
    })
}

/// Uniform pick among `members` (ascending OIDs) inside `[oid - w, oid + w]`,
/// clamped to `[0, limit)`. Never returns `oid` itself.
fn pick_in_window(
    members: &[Oid],
    oid: usize,
    window: u32,
    limit: usize,
    rng: &mut SimRng,
) -> Option<Oid> {
    let lo = oid.saturating_sub(window as usize) as u32;
    let hi = (oid + window as usize).min(limit.saturating_sub(1)) as u32;
    let start = members.partition_point(|o| o.0 < lo);
    let end = members.partition_point(|o| o.0 <= hi);
    let candidates = &members[start..end];
    let self_pos = candidates.binary_search(&Oid(oid as u32)).ok();
    let n = candidates.len() - self_pos.is_some() as usize;
    if n == 0 {
        return None;
    }
    let mut i = rng.gen_range(0..n);
    if let Some(p) = self_pos {
        if i >= p {
            i += 1;
        }
    }
    Some(candidates[i])
}

fn install_backrefs(objects: &mut [ObjectInstance]) {
    for o in objects.iter_mut() {
        o.backrefs.clear();
    }
    for src in 0..objects.len() {
        for k in 0..objects[src].orefs.len() {
            let r = objects[src].orefs[k];
            objects[r.target.index()].backrefs.push(Ref {
                target: Oid(src as u32),
                ref_type: r.ref_type,
            });
        }
    }
}

/// What a database evolution changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evolution {
    Inserted { oid: Oid, touched: Vec<Oid> },
    Deleted { oid: Oid, touched: Vec<Oid> },
}

impl Database {
    /// Runs all three generation steps.
    pub fn generate(params: &SchemaParams, seed: u64) -> Result<Database> {
        let classes = generate_schema(params, seed)?;
        let classes = check_consistency(classes, &default_acyclic_types());
        instantiate_objects(classes, params, seed)
    }

    /// Live object, or `None` when the OID is unknown or deleted.
    pub fn object(&self, oid: Oid) -> Option<&ObjectInstance> {
        self.objects.get(oid.index()).filter(|o| !o.deleted)
    }

    pub fn contains(&self, oid: Oid) -> bool {
        self.object(oid).is_some()
    }

    pub fn class(&self, id: ClassId) -> &ClassSpec {
        &self.classes[id.index()]
    }

    pub fn class_of(&self, oid: Oid) -> Option<ClassId> {
        self.object(oid).map(|o| o.class_id)
    }

    pub fn live_count(&self) -> usize {
        self.objects.iter().filter(|o| !o.deleted).count()
    }

    pub fn live_oids(&self) -> Vec<Oid> {
        self.objects
            .iter()
            .filter(|o| !o.deleted)
            .map(|o| o.oid)
            .collect()
    }

    /// Uniform live object. Rejection sampling keeps the draw count low when
    /// few objects are deleted.
    pub fn random_oid(&self, rng: &mut SimRng) -> Option<Oid> {
        let n = self.objects.len();
        if n == 0 {
            return None;
        }
        for _ in 0..64 {
            let o = &self.objects[rng.gen_range(0..n)];
            if !o.deleted {
                return Some(o.oid);
            }
        }
        let live = self.live_oids();
        if live.is_empty() {
            None
        } else {
            Some(live[rng.gen_range(0..live.len())])
        }
    }

    pub fn total_filler_bytes(&self) -> u64 {
        self.objects
            .iter()
            .filter(|o| !o.deleted)
            .map(|o| o.filler_size as u64)
            .sum()
    }

    /// Inserts a clone-of-class object or deletes a uniform victim, keeping
    /// the back-reference bijection intact. A database with one live object
    /// only grows.
    pub fn evolve(&mut self, rng: &mut SimRng) -> Option<Evolution> {
        let insert = self.live_count() <= 1 || rng.gen_bool(0.5);
        if insert {
            self.insert_object(rng)
        } else {
            self.delete_object(rng)
        }
    }

    pub fn insert_object(&mut self, rng: &mut SimRng) -> Option<Evolution> {
        let model = self.random_oid(rng)?;
        let class_id = self.objects[model.index()].class_id;
        let oid = Oid(self.objects.len() as u32);
        let limit = self.objects.len() + 1;
        let crefs = self.classes[class_id.index()].crefs.clone();
        let mut orefs = Vec::with_capacity(crefs.len());
        for cref in &crefs {
            let members = &self.classes[cref.target.index()].iterator;
            if let Some(t) = pick_in_window(members, oid.index(), self.params.olocref, limit, rng)
            {
                orefs.push(Ref {
                    target: t,
                    ref_type: cref.ref_type,
                });
            }
        }
        let class = &mut self.classes[class_id.index()];
        class.iterator.push(oid);
        let obj = ObjectInstance {
            oid,
            class_id,
            orefs: orefs.clone(),
            backrefs: Vec::new(),
            attributes: (0..self.params.attrange)
                .map(|_| rng.gen_range(0..ATTRIBUTE_RANGE))
                .collect(),
            filler_size: class.instance_size,
            deleted: false,
        };
        self.objects.push(obj);
        for r in &orefs {
            self.objects[r.target.index()].backrefs.push(Ref {
                target: oid,
                ref_type: r.ref_type,
            });
        }
        Some(Evolution::Inserted {
            oid,
            touched: orefs.iter().map(|r| r.target).collect(),
        })
    }

    pub fn delete_object(&mut self, rng: &mut SimRng) -> Option<Evolution> {
        if self.live_count() <= 1 {
            return None;
        }
        let victim = self.random_oid(rng)?;
        let orefs = std::mem::take(&mut self.objects[victim.index()].orefs);
        let backrefs = std::mem::take(&mut self.objects[victim.index()].backrefs);
        let mut touched = Vec::new();
        for r in &orefs {
            let br = &mut self.objects[r.target.index()].backrefs;
            if let Some(pos) = br
                .iter()
                .position(|b| b.target == victim && b.ref_type == r.ref_type)
            {
                br.remove(pos);
            }
            touched.push(r.target);
        }
        for b in &backrefs {
            let referrer = &mut self.objects[b.target.index()].orefs;
            referrer.retain(|r| r.target != victim);
            touched.push(b.target);
        }
        touched.sort();
        touched.dedup();
        let class = self.objects[victim.index()].class_id;
        self.classes[class.index()].iterator.retain(|&o| o != victim);
        self.objects[victim.index()].deleted = true;
        Some(Evolution::Deleted {
            oid: victim,
            touched,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cref(target: u32, ty: u8) -> Ref<ClassId> {
        Ref {
            target: ClassId(target),
            ref_type: RefType(ty),
        }
    }

    fn bare_class(id: u32, crefs: Vec<Ref<ClassId>>) -> ClassSpec {
        let mut c = ClassSpec {
            class_id: ClassId(id),
            maxnref: crefs.len() as u32,
            basesize: 50,
            crefs,
            instance_size: 0,
            iterator: vec![],
        };
        c.instance_size = c.computed_instance_size();
        c
    }

    #[test]
    fn single_class_without_refs() {
        let params = SchemaParams {
            nc: 1,
            clocref: 1,
            maxnref: 0,
            ..SchemaParams::with_counts(1, 10)
        };
        let classes = generate_schema(&params, 1).unwrap();
        assert_eq!(classes.len(), 1);
        assert!(classes[0].crefs.is_empty());
        assert_eq!(classes[0].instance_size, 50);
    }

    #[test]
    fn schema_is_deterministic() {
        let params = SchemaParams {
            clocref: 1,
            ..SchemaParams::with_counts(10, 100)
        };
        let a = generate_schema(&params, 99).unwrap();
        let b = generate_schema(&params, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_schema(&params, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_refs_stay_in_window() {
        let params = SchemaParams::with_counts(50, 100);
        for seed in 0..5 {
            for c in generate_schema(&params, seed).unwrap() {
                for r in &c.crefs {
                    let d = (r.target.0 as i64 - c.class_id.0 as i64).abs();
                    assert!(d <= 50 && d > 0);
                }
                assert!(c.crefs.len() as u32 <= c.maxnref);
            }
        }
    }

    #[test]
    fn two_cycle_loses_one_edge() {
        let classes = vec![bare_class(0, vec![cref(1, 0)]), bare_class(1, vec![cref(0, 0)])];
        let out = check_consistency(classes, &default_acyclic_types());
        let total: usize = out.iter().map(|c| c.crefs.len()).sum();
        assert_eq!(total, 1);
        assert_eq!(out[0].crefs, vec![cref(1, 0)]);
        // sizes follow the surviving reference count
        assert_eq!(out[1].instance_size, 50);
    }

    #[test]
    fn non_acyclic_types_are_untouched() {
        let classes = vec![bare_class(0, vec![cref(1, 2)]), bare_class(1, vec![cref(0, 2)])];
        let out = check_consistency(classes.clone(), &default_acyclic_types());
        assert_eq!(out, classes);
    }

    #[test]
    fn acyclic_input_is_a_fixpoint() {
        let classes = vec![
            bare_class(0, vec![cref(1, 0), cref(2, 1)]),
            bare_class(1, vec![cref(2, 0)]),
            bare_class(2, vec![cref(0, 3)]),
        ];
        let out = check_consistency(classes.clone(), &default_acyclic_types());
        assert_eq!(out, classes);
    }

    #[test]
    fn object_size_formula() {
        let one = bare_class(0, vec![cref(1, 2)]);
        assert_eq!(one.instance_size, 100);
        let leaf = bare_class(1, vec![]);
        assert_eq!(leaf.instance_size, 50);
    }

    #[test]
    fn single_object_database() {
        let params = SchemaParams::with_counts(5, 1);
        let db = Database::generate(&params, 3).unwrap();
        assert_eq!(db.objects.len(), 1);
        assert!(db.objects[0].orefs.is_empty());
        assert!(db.objects[0].backrefs.is_empty());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = SchemaParams::with_counts(10, 100);
        p.clocref = 11;
        assert!(matches!(generate_schema(&p, 0), Err(Error::Param(_))));
        let mut p = SchemaParams::with_counts(10, 100);
        p.olocref = 0;
        assert!(Database::generate(&p, 0).is_err());
        let mut p = SchemaParams::with_counts(10, 100);
        p.nreft = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn evolution_keeps_backrefs_consistent() {
        let params = SchemaParams::with_counts(8, 300);
        let mut db = Database::generate(&params, 11).unwrap();
        let mut rng = rng::stream(5, &[]);
        for _ in 0..200 {
            db.evolve(&mut rng);
        }
        for o in db.objects.iter().filter(|o| !o.deleted) {
            for r in &o.orefs {
                let t = db.object(r.target).expect("dangling oref");
                assert!(t.backrefs.iter().any(|b| b.target == o.oid));
            }
            for b in &o.backrefs {
                let s = db.object(b.target).expect("dangling backref");
                assert!(s.orefs.iter().any(|r| r.target == o.oid));
            }
        }
    }
}
