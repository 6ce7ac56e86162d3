//! Reader for `.scn` scenario files.
//!
//! The format is TOML. See `scenarios/GRAMMAR.md` for every section and
//! key. Speeds may be given in m/s (`*_mps`) or km/h (`*_kmh`), never both.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use ssbump_core::bump::BumpConfig;
use ssbump_core::geo::{GeoPoint, Heading};
use ssbump_core::protocol::VehicleId;
use ssbump_core::sim::{BumpSite, EvSpec, Scenario, ValidationIssue, DEFAULT_BEACON_INTERVAL_S};
use ssbump_core::traffic::{BumpType, Calibration, SpeedModel};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

/// One problem found in a scenario document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line, when the problem can be tied to one.
    pub line: Option<usize>,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Parses and validates a scenario document, reporting every problem found.
pub fn load_scenario(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let (root, errors) = DeTable::parse_recoverable(text);
    let mut cx = Cx {
        text,
        issues: Vec::new(),
        lines: BTreeMap::new(),
    };
    for e in &errors {
        let line = e.span().map(|s| cx.line_of(s.start));
        cx.issues.push(Diagnostic {
            line,
            path: String::new(),
            message: e.message().trim().to_string(),
        });
    }
    let scenario = read_scenario(&mut cx, root.get_ref());

    // Keys that failed to parse hold placeholders; skip validation findings
    // about them so each problem is reported once.
    let flagged: Vec<String> = cx
        .issues
        .iter()
        .map(|d| d.path.clone())
        .filter(|p| !p.is_empty())
        .collect();
    let overlaps = |path: &str| {
        flagged
            .iter()
            .any(|f| path.starts_with(f.as_str()) || f.starts_with(path))
    };
    if errors.is_empty() {
        if let Err(found) = scenario.validate() {
            for issue in found.into_iter().filter(|i| !overlaps(&i.path)) {
                let line = cx.line_for(&issue);
                cx.issues.push(Diagnostic {
                    line,
                    path: issue.path,
                    message: issue.message,
                });
            }
        }
    }
    if cx.issues.is_empty() {
        Ok(scenario)
    } else {
        cx.issues.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
        Err(cx.issues)
    }
}

struct Cx<'t> {
    text: &'t str,
    issues: Vec<Diagnostic>,
    /// Dotted path of every key and table read, to its line.
    lines: BTreeMap<String, usize>,
}

impl Cx<'_> {
    fn line_of(&self, offset: usize) -> usize {
        let end = offset.min(self.text.len());
        self.text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn note(&mut self, path: &str, span: Range<usize>) {
        let line = self.line_of(span.start);
        self.lines.entry(path.to_string()).or_insert(line);
    }

    fn fail(&mut self, path: &str, span: Option<Range<usize>>, message: impl Into<String>) {
        let line = span.map(|s| self.line_of(s.start));
        self.issues.push(Diagnostic {
            line,
            path: path.to_string(),
            message: message.into(),
        });
    }

    /// Best line for a validation issue: the key itself, else its closest
    /// enclosing table.
    fn line_for(&self, issue: &ValidationIssue) -> Option<usize> {
        let mut path = issue.path.as_str();
        loop {
            if let Some(&line) = self.lines.get(path) {
                return Some(line);
            }
            path = &path[..path.rfind('.')?];
        }
    }
}

/// A table being read; tracks which keys were consumed.
struct Section<'a, 'i> {
    path: String,
    table: &'a DeTable<'i>,
    used: BTreeSet<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a, 'i> Section<'a, 'i> {
    fn new(path: impl Into<String>, table: &'a DeTable<'i>) -> Self {
        Self {
            path: path.into(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        // top-level keys are reported under `scenario.`
        join(if self.path.is_empty() { "scenario" } else { &self.path }, key)
    }

    fn raw(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<&'a Spanned<DeValue<'i>>> {
        let (k, v) = self.table.get_key_value(key)?;
        self.used.insert(key.to_string());
        let path = self.key_path(key);
        cx.note(&path, k.span());
        Some(v)
    }

    fn num(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<f64> {
        let v = self.raw(cx, key)?;
        let n = match v.get_ref() {
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().ok(),
            DeValue::Integer(i) => i64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
                .ok()
                .map(|i| i as f64),
            _ => None,
        };
        if n.is_none() {
            cx.fail(
                &self.key_path(key),
                Some(v.span()),
                format!("expected a number, found {}", v.get_ref().type_str()),
            );
        }
        n
    }

    fn int<T: TryFrom<i64>>(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<T> {
        let v = self.raw(cx, key)?;
        let n = match v.get_ref() {
            DeValue::Integer(i) => i64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
                .ok()
                .and_then(|i| T::try_from(i).ok()),
            _ => None,
        };
        if n.is_none() {
            cx.fail(
                &self.key_path(key),
                Some(v.span()),
                "expected a non-negative integer in range",
            );
        }
        n
    }

    fn boolean(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<bool> {
        let v = self.raw(cx, key)?;
        let b = v.get_ref().as_bool();
        if b.is_none() {
            cx.fail(
                &self.key_path(key),
                Some(v.span()),
                format!("expected true or false, found {}", v.get_ref().type_str()),
            );
        }
        b
    }

    fn string(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<(String, Range<usize>)> {
        let v = self.raw(cx, key)?;
        match v.get_ref().as_str() {
            Some(s) => Some((s.to_string(), v.span())),
            None => {
                cx.fail(
                    &self.key_path(key),
                    Some(v.span()),
                    format!("expected a string, found {}", v.get_ref().type_str()),
                );
                None
            }
        }
    }

    /// Reads `{base}_mps` or `{base}_kmh` into m/s.
    fn speed(&mut self, cx: &mut Cx<'_>, base: &str) -> Option<f64> {
        let mps_key = format!("{base}_mps");
        let kmh_key = format!("{base}_kmh");
        let mps = self.num(cx, &mps_key);
        let kmh = self.num(cx, &kmh_key);
        // diagnostics may name either spelling
        for (from, to) in [(&mps_key, &kmh_key), (&kmh_key, &mps_key)] {
            if let Some(&line) = cx.lines.get(&self.key_path(from)) {
                cx.lines.entry(self.key_path(to)).or_insert(line);
            }
        }
        match (mps, kmh) {
            (Some(_), Some(_)) => {
                let span = self.table.get_key_value(kmh_key.as_str()).map(|(k, _)| k.span());
                cx.fail(
                    &self.key_path(&kmh_key),
                    span,
                    format!("give either {mps_key} or {kmh_key}, not both"),
                );
                None
            }
            (Some(v), None) => Some(v),
            (None, Some(v)) => Some(v / 3.6),
            (None, None) => None,
        }
    }

    fn table(&mut self, cx: &mut Cx<'_>, key: &str) -> Option<Section<'a, 'i>> {
        let v = self.raw(cx, key)?;
        match v.get_ref() {
            DeValue::Table(t) => Some(Section::new(join(&self.path, key), t)),
            other => {
                cx.fail(
                    &join(&self.path, key),
                    Some(v.span()),
                    format!("expected a table, found {}", other.type_str()),
                );
                None
            }
        }
    }

    /// Tables of an array-of-tables such as `[[bump]]`.
    fn tables(&mut self, cx: &mut Cx<'_>, key: &str) -> Vec<(Section<'a, 'i>, Range<usize>)> {
        let Some(v) = self.raw(cx, key) else {
            return Vec::new();
        };
        let Some(items) = v.get_ref().as_array() else {
            cx.fail(
                key,
                Some(v.span()),
                format!("expected [[{key}]] tables, found {}", v.get_ref().type_str()),
            );
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let path = format!("{key}[{i}]");
            match item.get_ref() {
                DeValue::Table(t) => {
                    cx.note(&path, item.span());
                    out.push((Section::new(path, t), item.span()));
                }
                other => cx.fail(
                    &path,
                    Some(item.span()),
                    format!("expected a table, found {}", other.type_str()),
                ),
            }
        }
        out
    }

    /// Reports every key that was never read.
    fn finish(self, cx: &mut Cx<'_>) {
        for (k, _) in self.table.iter() {
            if !self.used.contains(k.get_ref().as_ref()) {
                cx.fail(&join(&self.path, k.get_ref()), Some(k.span()), "unrecognized field");
            }
        }
    }
}

fn read_scenario(cx: &mut Cx<'_>, root: &DeTable<'_>) -> Scenario {
    let mut s = Scenario::default();
    let mut top = Section::new("", root);

    if let Some((name, _)) = top.string(cx, "name") {
        s.name = name;
    }
    match top.num(cx, "duration_s") {
        Some(d) => s.duration_s = d,
        None if !root.contains_key("duration_s") => cx.fail("scenario.duration_s", None, "duration missing"),
        None => {}
    }
    if let Some(seed) = top.int::<i64>(cx, "seed") {
        s.seed = seed as u64;
    }
    if let Some(b) = top.boolean(cx, "rfid_fallback") {
        s.rfid_fallback = b;
    }
    if let Some(b) = top.boolean(cx, "control_run") {
        s.control_run = b;
    }
    let mut kinematic = false;
    if let Some((model, span)) = top.string(cx, "speed_model") {
        match model.as_str() {
            "calibrated" => {}
            "kinematic" => kinematic = true,
            other => cx.fail(
                "scenario.speed_model",
                Some(span),
                format!("unknown speed model {other:?}; expected \"calibrated\" or \"kinematic\""),
            ),
        }
    }

    if let Some(mut road) = top.table(cx, "road") {
        if let Some(v) = road.num(cx, "length_m") {
            s.road.length_m = v;
        }
        let lat = road.num(cx, "origin_lat_deg").unwrap_or(s.road.origin.lat_deg());
        let lon = road.num(cx, "origin_lon_deg").unwrap_or(s.road.origin.lon_deg());
        match GeoPoint::new(lat, lon) {
            Ok(p) => s.road.origin = p,
            Err(e) => cx.fail("road.origin_lat_deg", None, e.to_string()),
        }
        if let Some(b) = road.num(cx, "bearing_deg") {
            match Heading::new(b) {
                Ok(h) => s.road.bearing = h,
                Err(e) => cx.fail("road.bearing_deg", None, e.to_string()),
            }
        }
        road.finish(cx);
    }

    if let Some(mut zone) = top.table(cx, "zone") {
        if let Some(v) = zone.num(cx, "upstream_m") {
            s.zone.upstream_m = v;
        }
        if let Some(v) = zone.num(cx, "downstream_m") {
            s.zone.downstream_m = v;
        }
        zone.finish(cx);
    }

    let mut calibration = Calibration::default();
    if let Some(mut cal) = top.table(cx, "calibration") {
        if kinematic {
            cx.fail(
                "calibration",
                None,
                "calibration table given with the kinematic speed model",
            );
        }
        for (base, slot) in [
            ("conventional_avg", &mut calibration.conventional_avg_mps),
            ("liquid_avg", &mut calibration.liquid_avg_mps),
            ("solid_avg", &mut calibration.solid_avg_mps),
            ("penalty_avg", &mut calibration.penalty_avg_mps),
        ] {
            if let Some(v) = cal.speed(cx, base) {
                *slot = v;
            }
        }
        cal.finish(cx);
    }
    s.speed_model = if kinematic {
        SpeedModel::Kinematic
    } else {
        SpeedModel::Calibrated(calibration)
    };

    if let Some(mut lora) = top.table(cx, "lora") {
        let l = &mut s.lora;
        if let Some(v) = lora.num(cx, "max_range_m") {
            l.max_range_m = v;
        }
        if let Some(v) = lora.num(cx, "loss_prob") {
            l.loss_prob = v;
        }
        if let Some(v) = lora.int(cx, "spreading_factor") {
            l.spreading_factor = v;
        }
        if let Some(v) = lora.int(cx, "bandwidth_hz") {
            l.bandwidth_hz = v;
        }
        if let Some(v) = lora.int(cx, "coding_rate_denom") {
            l.coding_rate_denom = v;
        }
        if let Some(v) = lora.int(cx, "preamble_symbols") {
            l.preamble_symbols = v;
        }
        if let Some(v) = lora.boolean(cx, "explicit_header") {
            l.explicit_header = v;
        }
        if let Some(v) = lora.boolean(cx, "crc_on") {
            l.crc_on = v;
        }
        if let Some(v) = lora.boolean(cx, "low_data_rate_optimize") {
            l.low_data_rate_optimize = v;
        }
        if let Some(v) = lora.num(cx, "carrier_mhz") {
            s.carrier_mhz = v;
        }
        lora.finish(cx);
    }

    if let Some(mut up) = top.table(cx, "uplink") {
        if let Some(v) = up.num(cx, "latency_ms_mean") {
            s.uplink.latency_ms_mean = v;
        }
        if let Some(v) = up.num(cx, "latency_ms_jitter") {
            s.uplink.latency_ms_jitter = v;
        }
        if let Some(v) = up.num(cx, "loss_prob") {
            s.uplink.loss_prob = v;
        }
        up.finish(cx);
    }

    if let Some(mut civ) = top.table(cx, "civilians") {
        let c = &mut s.civilians;
        if let Some(v) = civ.num(cx, "rate_per_s") {
            c.rate_per_s = v;
        }
        if let Some(v) = civ.int(cx, "count") {
            c.count = Some(v);
        }
        if let Some(v) = civ.speed(cx, "speed_min") {
            c.speed_min_mps = v;
        }
        if let Some(v) = civ.speed(cx, "speed_max") {
            c.speed_max_mps = v;
        }
        if let Some(v) = civ.num(cx, "compliance") {
            c.compliance = v;
        }
        civ.finish(cx);
    }

    for (mut b, span) in top.tables(cx, "bump") {
        s.bumps.push(read_bump(cx, &mut b, span));
        b.finish(cx);
    }
    for (mut e, span) in top.tables(cx, "ev") {
        if let Some(ev) = read_ev(cx, &mut e, span) {
            s.evs.push(ev);
        }
        e.finish(cx);
    }

    top.finish(cx);
    s
}

fn read_bump(cx: &mut Cx<'_>, b: &mut Section<'_, '_>, span: Range<usize>) -> BumpSite {
    let mut cfg = BumpConfig::default();
    match b.int(cx, "id") {
        Some(id) => cfg.bump_id = id,
        None if !b.table.contains_key("id") => cx.fail(&b.path, Some(span.clone()), "id missing"),
        None => {}
    }
    let chainage = b.num(cx, "chainage_m").unwrap_or_else(|| {
        if !b.table.contains_key("chainage_m") {
            cx.fail(&b.path, Some(span.clone()), "chainage_m missing");
        }
        f64::NAN
    });
    let mut kind = BumpType::SsBump;
    if let Some((t, tspan)) = b.string(cx, "type") {
        match t.as_str() {
            "ssbump" => {}
            "conventional" => kind = BumpType::Conventional,
            other => cx.fail(
                &b.key_path("type"),
                Some(tspan),
                format!("unknown bump type {other:?}; expected \"ssbump\" or \"conventional\""),
            ),
        }
    }
    for (key, slot) in [
        ("deflate_eta_threshold_s", &mut cfg.deflate_eta_threshold_s),
        ("lower_duration_s", &mut cfg.lower_duration_s),
        ("raise_duration_s", &mut cfg.raise_duration_s),
        ("nominal_height_m", &mut cfg.nominal_height_m),
        ("penalty_height_m", &mut cfg.penalty_height_m),
        ("approach_cone_deg", &mut cfg.approach_cone_deg),
        ("pass_radius_m", &mut cfg.pass_radius_m),
        ("beacon_timeout_s", &mut cfg.beacon_timeout_s),
        ("sensor_offset_m", &mut cfg.sensor_offset_m),
        ("rfid_offset_m", &mut cfg.rfid_offset_m),
    ] {
        if let Some(v) = b.num(cx, key) {
            *slot = v;
        }
    }
    for (base, slot) in [
        ("speed_limit", &mut cfg.speed_limit_mps),
        ("nominal_ev_speed", &mut cfg.nominal_ev_speed_mps),
        ("ev_speed_cap", &mut cfg.ev_speed_cap_mps),
    ] {
        if let Some(v) = b.speed(cx, base) {
            *slot = v;
        }
    }
    // the critical speed follows the limit unless set explicitly
    cfg.oobleck.critical_speed_mps = cfg.speed_limit_mps;
    if let Some(mut o) = b.table(cx, "oobleck") {
        let p = &mut cfg.oobleck;
        for (key, slot) in [
            ("layer_thickness_m", &mut p.layer_thickness_m),
            ("consistency_k", &mut p.consistency_k),
            ("flow_index_n", &mut p.flow_index_n),
        ] {
            if let Some(v) = o.num(cx, key) {
                *slot = v;
            }
        }
        for (base, slot) in [
            ("critical_speed", &mut p.critical_speed_mps),
            ("solid_crossing_speed", &mut p.solid_crossing_speed_mps),
            ("penalty_crossing_speed", &mut p.penalty_crossing_speed_mps),
        ] {
            if let Some(v) = o.speed(cx, base) {
                *slot = v;
            }
        }
        o.finish(cx);
    }
    BumpSite {
        chainage_m: chainage,
        kind,
        config: cfg,
    }
}

fn read_ev(cx: &mut Cx<'_>, e: &mut Section<'_, '_>, span: Range<usize>) -> Option<EvSpec> {
    let id = match e.int::<u32>(cx, "id") {
        Some(id) => VehicleId::new(id).or_else(|| {
            cx.fail(&e.key_path("id"), Some(span.clone()), "vehicle id must be nonzero");
            None
        }),
        None => {
            if !e.table.contains_key("id") {
                cx.fail(&e.path, Some(span.clone()), "id missing");
            }
            None
        }
    };
    let cruise = e.speed(cx, "cruise");
    if cruise.is_none() && !e.table.contains_key("cruise_mps") && !e.table.contains_key("cruise_kmh") {
        cx.fail(&e.path, Some(span.clone()), "cruise_kmh missing");
    }
    let dispatch_s = e.num(cx, "dispatch_s").unwrap_or(0.0);
    let start_chainage_m = e.num(cx, "start_chainage_m").unwrap_or(0.0);
    let beacon_interval_s = e.num(cx, "beacon_interval_s").unwrap_or(DEFAULT_BEACON_INTERVAL_S);
    let registered = e.boolean(cx, "registered").unwrap_or(true);
    Some(EvSpec {
        id: id?,
        dispatch_s,
        start_chainage_m,
        cruise_speed_mps: cruise.unwrap_or(f64::NAN),
        beacon_interval_s,
        registered,
    })
}
