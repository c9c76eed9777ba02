use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    merge_narratives, CrashRecord, DatasetManifest, RoadTypeMapper, RuralUrban, ScrubReport,
    Scrubber, StructuredFields,
};
use crate::error::{Error, Result};

/// A quarantined crash key and the reason it was not ingested.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExceptionRow {
    pub crash_key: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOutput {
    pub records: Vec<CrashRecord>,
    pub exceptions: Vec<ExceptionRow>,
    pub scrub: ScrubReport,
    /// Fields that contained invalid UTF-8 (bytes replaced with U+FFFD).
    pub invalid_utf8_fields: usize,
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
    invalid_utf8: usize,
}

fn read_table<R: Read>(reader: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let header = rdr
        .byte_headers()?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().to_ascii_uppercase())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    let mut invalid = 0usize;
    for rec in rdr.byte_records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields = rec
            .iter()
            .map(|f| match std::str::from_utf8(f) {
                Ok(s) => s.to_string(),
                Err(_) => {
                    invalid += 1;
                    String::from_utf8_lossy(f).into_owned()
                }
            })
            .collect();
        rows.push((line, fields));
    }
    Ok(RawTable { header, rows, invalid_utf8: invalid })
}

impl RawTable {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn field<'a>(row: &'a [String], idx: Option<usize>) -> Option<&'a str> {
    idx.and_then(|i| row.get(i)).map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "y" | "yes" | "true" | "t" => Some(true),
        "0" | "n" | "no" | "false" | "f" => Some(false),
        _ => None,
    }
}

/// Finds keys occurring more than once.
fn duplicates<'a>(keys: impl Iterator<Item = &'a str>) -> HashSet<String> {
    let mut seen = HashSet::new();
    let mut dup = HashSet::new();
    for k in keys {
        if !seen.insert(k) {
            dup.insert(k.to_string());
        }
    }
    dup
}

struct TabularRow {
    road_type: Option<String>,
    structured: StructuredFields,
}

fn parse_tabular(
    row: &[String],
    t: &RawTable,
    manifest: &DatasetManifest,
) -> std::result::Result<TabularRow, String> {
    let lat = field(row, t.column("LAT"))
        .map(|s| s.parse::<f64>().map_err(|_| format!("invalid LAT {s:?}")))
        .transpose()?;
    let lon = field(row, t.column("LON"))
        .map(|s| s.parse::<f64>().map_err(|_| format!("invalid LON {s:?}")))
        .transpose()?;
    let road_class = field(row, t.column("ROAD_CLASS")).map(str::to_string);
    let maneuver = field(row, t.column("MANEUVER")).map(str::to_string);
    let lists = &manifest.code_lists;
    if let Some(rc) = &road_class {
        if !lists.road_class.is_empty() && !lists.road_class.contains(rc) {
            return Err(format!("undeclared ROAD_CLASS code {rc:?}"));
        }
    }
    if let Some(m) = &maneuver {
        if !lists.vehicle_maneuver.is_empty() && !lists.vehicle_maneuver.contains(m) {
            return Err(format!("undeclared MANEUVER code {m:?}"));
        }
    }
    let tcd = match field(row, t.column("TCD")) {
        Some(s) => Some(parse_bool(s).ok_or_else(|| format!("invalid TCD {s:?}"))?),
        None => None,
    };
    let rural_urban = match field(row, t.column("RURAL_URBAN")) {
        Some(s) => Some(RuralUrban::parse(s).ok_or_else(|| format!("invalid RURAL_URBAN {s:?}"))?),
        None => None,
    };
    let structured = StructuredFields {
        latitude: lat,
        longitude: lon,
        road_class,
        tcd_present: tcd,
        vehicle_maneuver: maneuver,
        rural_urban,
    };
    structured.validate().map_err(|e| e.to_string())?;
    Ok(TabularRow { road_type: field(row, t.column("ROADTYPE")).map(str::to_string), structured })
}

/// Joins a narratives CSV with an optional tabular CSV on `CRASH_KEY`.
///
/// Records that cannot be ingested (unmatched or duplicated keys, unknown road
/// types, empty narratives, invalid structured fields) are listed as
/// exceptions instead of being dropped silently.
pub fn ingest_readers<R1: Read, R2: Read>(
    narratives: R1,
    tabular: Option<R2>,
    manifest: &DatasetManifest,
) -> Result<IngestOutput> {
    let narr = read_table(narratives)?;
    let key_col = narr
        .column("CRASH_KEY")
        .ok_or_else(|| Error::Parse { line: 1, message: "narratives file lacks CRASH_KEY".into() })?;
    let part_cols: Vec<Option<usize>> =
        (1..=5).map(|i| narr.column(&format!("NARRATIVE{i}"))).collect();

    let mut exceptions = Vec::new();
    let mut invalid_utf8 = narr.invalid_utf8;
    let narr_keys: Vec<&str> = narr.rows.iter().map(|(_, r)| field(r, Some(key_col)).unwrap_or("")).collect();
    let mut dup = duplicates(narr_keys.iter().copied());

    let tab = tabular.map(read_table).transpose()?;
    let mut tab_index: HashMap<String, usize> = HashMap::new();
    if let Some(t) = &tab {
        invalid_utf8 += t.invalid_utf8;
        let tk = t
            .column("CRASH_KEY")
            .ok_or_else(|| Error::Parse { line: 1, message: "tabular file lacks CRASH_KEY".into() })?;
        let keys: Vec<&str> = t.rows.iter().map(|(_, r)| field(r, Some(tk)).unwrap_or("")).collect();
        dup.extend(duplicates(keys.iter().copied()));
        for (i, k) in keys.iter().enumerate() {
            tab_index.insert(k.to_string(), i);
        }
        let narr_set: HashSet<&str> = narr_keys.iter().copied().collect();
        for k in &keys {
            if !narr_set.contains(k) && !dup.contains(*k) {
                exceptions.push(ExceptionRow { crash_key: k.to_string(), reason: "no narrative".into() });
            }
        }
    }
    let mut reported_dup = HashSet::new();
    for k in &dup {
        if reported_dup.insert(k.clone()) {
            exceptions.push(ExceptionRow { crash_key: k.clone(), reason: "duplicate crash key".into() });
        }
    }

    let mapper = RoadTypeMapper::with_overrides(manifest.road_type_overrides.iter());
    let scrubber = Scrubber::new(manifest.scrub.clone());

    let results: Vec<std::result::Result<(CrashRecord, ScrubReport), ExceptionRow>> = narr
        .rows
        .par_iter()
        .zip(narr_keys.par_iter())
        .filter(|(_, key)| !dup.contains(**key))
        .map(|((line, row), key)| {
            let ex = |reason: String| ExceptionRow { crash_key: key.to_string(), reason };
            if key.is_empty() {
                return Err(ex(format!("line {line}: missing CRASH_KEY")));
            }
            let parts: Vec<&str> = part_cols.iter().map(|c| field(row, *c).unwrap_or("")).collect();
            let merged = merge_narratives(key, &parts).map_err(|e| ex(e.to_string()))?;
            let (narrative, report) = scrubber.scrub(&merged);
            let mut rec = CrashRecord::new(*key, narrative);
            if let Some(t) = &tab {
                let idx = *tab_index.get(*key).ok_or_else(|| ex("no tabular row".into()))?;
                let trow = parse_tabular(&t.rows[idx].1, t, manifest).map_err(ex)?;
                if let Some(rt) = trow.road_type {
                    rec.label = Some(mapper.map(&rt).map_err(|e| ex(e.to_string()))?);
                }
                if !trow.structured.is_empty() {
                    rec.structured = Some(trow.structured);
                }
            }
            Ok((rec, report))
        })
        .collect();

    let mut out = IngestOutput { invalid_utf8_fields: invalid_utf8, ..Default::default() };
    for r in results {
        match r {
            Ok((rec, report)) => {
                out.scrub.merge(&report);
                out.records.push(rec);
            }
            Err(e) => exceptions.push(e),
        }
    }
    exceptions.sort();
    out.exceptions = exceptions;
    Ok(out)
}

pub fn ingest_files(
    narratives: &Path,
    tabular: Option<&Path>,
    manifest: &DatasetManifest,
) -> Result<IngestOutput> {
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(p.to_path_buf()),
            _ => Error::Io(e),
        })
    };
    let n = open(narratives)?;
    let t = tabular.map(open).transpose()?;
    ingest_readers(n, t, manifest)
}

/// Writes records as JSON lines.
pub fn write_dataset(path: &Path, records: &[CrashRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<CrashRecord>> {
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CrashRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if !seen.insert(rec.crash_key.clone()) {
            return Err(Error::DuplicateKey(rec.crash_key));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_exceptions(path: &Path, rows: &[ExceptionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["crash_key", "reason"])?;
    for r in rows {
        w.write_record([&r.crash_key, &r.reason])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RoadTypeLabel;

    const NARR: &str = "CRASH_KEY,NARRATIVE1,NARRATIVE2,NARRATIVE3,NARRATIVE4,NARRATIVE5\n\
        1,V1 struck V2,at the intersection,,,\n\
        2,Vehicle slid,off roadway,,,\n\
        3,,,,,\n\
        4,dup one,,,,\n\
        4,dup two,,,,\n\
        5,call 515-555-1234,,,,\n\
        6,only narrative,,,,\n";
    const TAB: &str = "CRASH_KEY,ROADTYPE,LAT,LON,ROAD_CLASS,TCD,MANEUVER,RURAL_URBAN\n\
        1,Four-way intersection,41.6,-93.6,CITY,1,LEFT_TURN,Urban\n\
        2,Non-junction/no special feature,,,,,,\n\
        3,Roundabout\n\
        4,Alley\n\
        5,Parking ramp\n\
        7,Alley\n";

    #[test]
    fn join_and_exceptions() {
        let out = ingest_readers(NARR.as_bytes(), Some(TAB.as_bytes()), &DatasetManifest::default()).unwrap();
        let keys: Vec<_> = out.records.iter().map(|r| r.crash_key.as_str()).collect();
        assert_eq!(keys, ["1", "2"]);
        assert_eq!(out.records[0].narrative, "V1 struck V2 at the intersection");
        assert_eq!(out.records[0].label, Some(RoadTypeLabel::Intersection));
        let s = out.records[0].structured.as_ref().unwrap();
        assert_eq!(s.tcd_present, Some(true));
        assert_eq!(s.rural_urban, Some(RuralUrban::Urban));
        assert!(out.records[1].structured.is_none());
        let ex: Vec<(&str, &str)> =
            out.exceptions.iter().map(|e| (e.crash_key.as_str(), e.reason.as_str())).collect();
        assert!(ex.iter().any(|(k, r)| *k == "3" && r.contains("empty")));
        assert!(ex.iter().any(|(k, r)| *k == "4" && r.contains("duplicate")));
        assert!(ex.iter().any(|(k, r)| *k == "5" && r.contains("unknown road type")));
        assert!(ex.iter().any(|(k, r)| *k == "6" && r.contains("no tabular")));
        assert!(ex.iter().any(|(k, r)| *k == "7" && r.contains("no narrative")));
        assert_eq!(ex.iter().filter(|(k, _)| *k == "4").count(), 1);
    }

    #[test]
    fn scrub_applied_during_ingest() {
        let narr = "CRASH_KEY,NARRATIVE1\n9,call 515-555-1234\n";
        let out = ingest_readers(narr.as_bytes(), None::<&[u8]>, &DatasetManifest::default()).unwrap();
        assert_eq!(out.records[0].narrative, "call [PHONE]");
        assert_eq!(out.scrub.total(), 1);
        assert!(out.records[0].label.is_none());
    }

    #[test]
    fn invalid_utf8_replaced_and_counted() {
        let mut bytes = b"CRASH_KEY,NARRATIVE1\n1,bad ".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe]);
        bytes.extend_from_slice(b" byte\n");
        let out = ingest_readers(bytes.as_slice(), None::<&[u8]>, &DatasetManifest::default()).unwrap();
        assert_eq!(out.invalid_utf8_fields, 1);
        assert!(out.records[0].narrative.contains('\u{fffd}'));
    }

    #[test]
    fn undeclared_code_quarantined() {
        let mut m = DatasetManifest::default();
        m.code_lists.road_class = vec!["RURAL_HWY".into()];
        let out = ingest_readers(NARR.as_bytes(), Some(TAB.as_bytes()), &m).unwrap();
        assert!(out.exceptions.iter().any(|e| e.crash_key == "1" && e.reason.contains("ROAD_CLASS")));
    }

    #[test]
    fn dataset_jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let out = ingest_readers(NARR.as_bytes(), Some(TAB.as_bytes()), &DatasetManifest::default()).unwrap();
        write_dataset(&p, &out.records).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), out.records);
    }
}
