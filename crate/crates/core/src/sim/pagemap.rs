use std::collections::BTreeSet;

use crate::db::{object_size, Database};
use crate::error::{Error, Result};
use crate::ids::{Oid, PageId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub oids: Vec<Oid>,
    pub used: u32,
}

/// Object-to-page assignment. Pages are never freed: objects moved away by
/// clustering leave holes behind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageMap {
    page_size: u32,
    loc: Vec<Option<PageId>>,
    sizes: Vec<u32>,
    pages: Vec<Page>,
    /// Size used for objects first seen in an evolution record.
    default_size: u32,
}

impl PageMap {
    pub fn new(page_size: u32) -> PageMap {
        PageMap {
            page_size,
            loc: Vec::new(),
            sizes: Vec::new(),
            pages: Vec::new(),
            default_size: 1,
        }
    }

    /// Packs objects into pages in ascending OID order, opening a new page
    /// whenever the next object does not fit.
    pub fn place_sequential(db: &Database, page_size: u32) -> Result<PageMap> {
        let mut map = PageMap::new(page_size);
        let mut total = 0u64;
        let mut n = 0u64;
        for obj in db.objects.iter().filter(|o| !o.deleted) {
            let size = object_size(obj);
            map.append(obj.oid, size)?;
            total += size as u64;
            n += 1;
        }
        if let Some(mean) = total.checked_div(n) {
            map.default_size = (mean as u32).max(1);
        }
        Ok(map)
    }

    fn ensure_slot(&mut self, oid: Oid) {
        if oid.index() >= self.loc.len() {
            self.loc.resize(oid.index() + 1, None);
            self.sizes.resize(oid.index() + 1, 0);
        }
    }

    /// Adds an unplaced object at the end of the last page, or on a new page.
    pub fn append(&mut self, oid: Oid, size: u32) -> Result<PageId> {
        if size > self.page_size {
            return Err(Error::Placement(format!(
                "object {oid} has {size} bytes, page holds {}",
                self.page_size
            )));
        }
        self.ensure_slot(oid);
        if self.loc[oid.index()].is_some() {
            return Err(Error::Placement(format!("object {oid} placed twice")));
        }
        let fits = self
            .pages
            .last()
            .is_some_and(|p| p.used + size <= self.page_size);
        if !fits {
            self.pages.push(Page::default());
        }
        let pid = PageId(self.pages.len() as u32 - 1);
        let page = self.pages.last_mut().unwrap();
        page.oids.push(oid);
        page.used += size;
        self.loc[oid.index()] = Some(pid);
        self.sizes[oid.index()] = size;
        Ok(pid)
    }

    pub fn page_size(&self) -> u32 {
        self.page_size
    }

    pub fn default_size(&self) -> u32 {
        self.default_size
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn object_count(&self) -> usize {
        self.loc.iter().filter(|l| l.is_some()).count()
    }

    pub fn page_of(&self, oid: Oid) -> Option<PageId> {
        self.loc.get(oid.index()).copied().flatten()
    }

    /// `(page, slot)` of an object; the slot is its position on the page.
    pub fn locate(&self, oid: Oid) -> Option<(PageId, usize)> {
        let pid = self.page_of(oid)?;
        let slot = self.pages[pid.index()].oids.iter().position(|&o| o == oid)?;
        Some((pid, slot))
    }

    pub fn page(&self, pid: PageId) -> &Page {
        &self.pages[pid.index()]
    }

    pub fn size_of(&self, oid: Oid) -> u32 {
        self.sizes.get(oid.index()).copied().unwrap_or(0)
    }

    pub fn pages(&self) -> impl Iterator<Item = (PageId, &Page)> {
        self.pages
            .iter()
            .enumerate()
            .map(|(i, p)| (PageId(i as u32), p))
    }

    fn detach(&mut self, oid: Oid) -> Option<PageId> {
        let pid = self.loc.get_mut(oid.index())?.take()?;
        let size = self.sizes[oid.index()];
        let page = &mut self.pages[pid.index()];
        page.oids.retain(|&o| o != oid);
        page.used -= size;
        Some(pid)
    }

    fn fresh_page(&mut self) -> PageId {
        self.pages.push(Page::default());
        PageId(self.pages.len() as u32 - 1)
    }

    fn put(&mut self, pid: PageId, oid: Oid) {
        let size = self.sizes[oid.index()];
        let page = &mut self.pages[pid.index()];
        page.oids.push(oid);
        page.used += size;
        self.loc[oid.index()] = Some(pid);
    }

    /// Moves each group onto fresh pages, first-fit in the given order, starting
    /// a new page for every group. Returns the new pages.
    pub fn relocate(&mut self, groups: &[Vec<Oid>]) -> Vec<PageId> {
        let mut fresh = Vec::new();
        for group in groups {
            let mut current: Option<PageId> = None;
            for &oid in group {
                if self.detach(oid).is_none() {
                    continue;
                }
                let size = self.sizes[oid.index()];
                let pid = match current {
                    Some(p) if self.pages[p.index()].used + size <= self.page_size => p,
                    _ => {
                        let p = self.fresh_page();
                        fresh.push(p);
                        p
                    }
                };
                self.put(pid, oid);
                current = Some(pid);
            }
        }
        fresh
    }

    /// Opens an empty page.
    pub fn new_page(&mut self) -> PageId {
        self.fresh_page()
    }

    /// Moves a placed object onto another page with room for it.
    pub fn move_object(&mut self, oid: Oid, to: PageId) -> Result<()> {
        let size = self.size_of(oid);
        let room = self
            .pages
            .get(to.index())
            .map(|p| p.used + size <= self.page_size)
            .ok_or_else(|| Error::Placement(format!("no page {to}")))?;
        if !room {
            return Err(Error::Placement(format!("object {oid} does not fit on page {to}")));
        }
        self.detach(oid)
            .ok_or_else(|| Error::Placement(format!("object {oid} is not placed")))?;
        self.put(to, oid);
        Ok(())
    }

    /// Rewrites `pages` in place with their objects in `order` (which must be
    /// exactly the objects they hold): each object goes to the first page of
    /// `pages` with room. Fails without changing anything when the objects
    /// do not fit that way. Returns the pages whose contents changed.
    pub fn repack(&mut self, pages: &[PageId], order: &[Oid]) -> Result<Vec<PageId>> {
        let before: Vec<Vec<Oid>> = pages
            .iter()
            .map(|p| self.pages[p.index()].oids.clone())
            .collect();
        let held: BTreeSet<Oid> = before.iter().flatten().copied().collect();
        let wanted: BTreeSet<Oid> = order.iter().copied().collect();
        if held != wanted || wanted.len() != order.len() {
            return Err(Error::Placement(
                "repack order must list exactly the objects of the pages".into(),
            ));
        }
        let sizes: Vec<u32> = order.iter().map(|o| self.sizes[o.index()]).collect();
        let slots = first_fit(&sizes, pages.len(), self.page_size).ok_or_else(|| {
            Error::Placement("objects do not fit their pages in the requested order".into())
        })?;
        for &p in pages {
            let page = &mut self.pages[p.index()];
            for &o in &page.oids {
                self.loc[o.index()] = None;
            }
            page.oids.clear();
            page.used = 0;
        }
        for (&oid, slot) in order.iter().zip(slots) {
            self.put(pages[slot], oid);
        }
        Ok(pages
            .iter()
            .zip(&before)
            .filter(|(p, b)| self.pages[p.index()].oids != **b)
            .map(|(p, _)| *p)
            .collect())
    }

    /// Checks the bijection and capacity invariants.
    pub fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.loc.len()];
        for (i, page) in self.pages.iter().enumerate() {
            let mut used = 0u32;
            for &o in &page.oids {
                if self.loc.get(o.index()).copied().flatten() != Some(PageId(i as u32)) {
                    return Err(Error::Placement(format!("object {o} misfiled on page {i}")));
                }
                if std::mem::replace(&mut seen[o.index()], true) {
                    return Err(Error::Placement(format!("object {o} placed twice")));
                }
                used += self.sizes[o.index()];
            }
            if used != page.used || used > self.page_size {
                return Err(Error::Placement(format!("page {i} fill level is wrong")));
            }
        }
        if self.loc.iter().zip(&seen).any(|(l, s)| l.is_some() != *s) {
            return Err(Error::Placement("object location without page entry".into()));
        }
        Ok(())
    }
}

/// First-fit assignment of items to `bins` bins of `capacity` bytes, or
/// `None` when some item finds no room.
pub fn first_fit(sizes: &[u32], bins: usize, capacity: u32) -> Option<Vec<usize>> {
    let mut used = vec![0u32; bins];
    sizes
        .iter()
        .map(|&s| {
            let b = used.iter().position(|&u| u + s <= capacity)?;
            used[b] += s;
            Some(b)
        })
        .collect()
}
