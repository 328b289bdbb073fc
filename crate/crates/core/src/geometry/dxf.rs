//! ASCII DXF subset: LINE, LWPOLYLINE and CIRCLE entities plus a LAYER
//! table. Group codes are read as (code, value) line pairs.

use super::{
    tessellate_circle, CircleMarker, Environment, Layer, Obstacle, Point2, Polyline,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DxfParseError {
    #[error("line {line}: group code '{token}' is not an integer")]
    BadGroupCode { line: usize, token: String },
    #[error("line {line}: group code without a value (odd line count)")]
    UnpairedCode { line: usize },
    #[error("line {line}: expected a number for code {code}, got '{token}'")]
    BadNumber { line: usize, code: i32, token: String },
    #[error("line {line}: non-finite coordinate")]
    NonFinite { line: usize },
    #[error("no ENTITIES section found")]
    MissingEntities,
}

struct Pair {
    code: i32,
    value: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Pair>, DxfParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pairs = Vec::with_capacity(lines.len() / 2);
    let mut i = 0;
    while i < lines.len() {
        let code_str = lines[i].trim();
        if code_str.is_empty() && i + 1 >= lines.len() {
            break; // trailing blank line
        }
        let code: i32 = code_str
            .parse()
            .map_err(|_| DxfParseError::BadGroupCode { line: i + 1, token: code_str.to_string() })?;
        if i + 1 >= lines.len() {
            return Err(DxfParseError::UnpairedCode { line: i + 1 });
        }
        pairs.push(Pair { code, value: lines[i + 1].trim().to_string(), line: i + 1 });
        i += 2;
    }
    Ok(pairs)
}

fn parse_f64(p: &Pair) -> Result<f64, DxfParseError> {
    let v: f64 = p
        .value
        .parse()
        .map_err(|_| DxfParseError::BadNumber { line: p.line + 1, code: p.code, token: p.value.clone() })?;
    if !v.is_finite() {
        return Err(DxfParseError::NonFinite { line: p.line + 1 });
    }
    Ok(v)
}

/// Parses the supported ASCII DXF subset into an [`Environment`].
///
/// Unknown entity types are skipped and reported in the warning list.
/// Layers referenced by entities but absent from the LAYER table are created
/// with `obstacle_active = true`.
pub fn parse_dxf_subset(text: &str) -> Result<(Environment, Vec<String>), DxfParseError> {
    let pairs = tokenize(text)?;
    let mut warnings = Vec::new();
    let mut layers: Vec<Layer> = Vec::new();
    let mut obstacles: Vec<Obstacle> = Vec::new();
    let mut next_id: u64 = 1;
    let mut saw_entities = false;

    let mut ensure_layer = |layers: &mut Vec<Layer>, name: &str| {
        if !layers.iter().any(|l| l.name == name) {
            layers.push(Layer { name: name.to_string(), obstacle_active: true });
        }
    };

    // Split the pair stream into sections keyed by the "2" pair that follows
    // each "0 SECTION".
    let mut i = 0;
    while i < pairs.len() {
        if pairs[i].code == 0 && pairs[i].value == "SECTION" {
            let name = if i + 1 < pairs.len() && pairs[i + 1].code == 2 {
                pairs[i + 1].value.clone()
            } else {
                String::new()
            };
            let start = i + 2;
            let mut end = start;
            while end < pairs.len() && !(pairs[end].code == 0 && pairs[end].value == "ENDSEC") {
                end += 1;
            }
            match name.as_str() {
                "TABLES" => parse_layer_table(&pairs[start..end], &mut layers),
                "ENTITIES" => {
                    saw_entities = true;
                    parse_entities(
                        &pairs[start..end],
                        &mut layers,
                        &mut obstacles,
                        &mut next_id,
                        &mut warnings,
                        &mut ensure_layer,
                    )?;
                }
                _ => {}
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }

    if !saw_entities {
        return Err(DxfParseError::MissingEntities);
    }
    let mut env = Environment { layers, obstacles, ..Environment::default() };
    env.rebuild_index();
    Ok((env, warnings))
}

fn parse_layer_table(pairs: &[Pair], layers: &mut Vec<Layer>) {
    let mut i = 0;
    while i < pairs.len() {
        if pairs[i].code == 0 && pairs[i].value == "LAYER" {
            let mut name = None;
            let mut active = true;
            let mut j = i + 1;
            while j < pairs.len() && pairs[j].code != 0 {
                match pairs[j].code {
                    2 => name = Some(pairs[j].value.clone()),
                    // DXF convention: a negative color means the layer is off.
                    62 => active = pairs[j].value.parse::<i32>().map_or(true, |c| c >= 0),
                    _ => {}
                }
                j += 1;
            }
            if let Some(name) = name {
                if !layers.iter().any(|l| l.name == name) {
                    layers.push(Layer { name, obstacle_active: active });
                }
            }
            i = j;
        } else {
            i += 1;
        }
    }
}

fn parse_entities(
    pairs: &[Pair],
    layers: &mut Vec<Layer>,
    obstacles: &mut Vec<Obstacle>,
    next_id: &mut u64,
    warnings: &mut Vec<String>,
    ensure_layer: &mut impl FnMut(&mut Vec<Layer>, &str),
) -> Result<(), DxfParseError> {
    // Group pairs into entities, each starting at a code-0 pair.
    let mut i = 0;
    while i < pairs.len() {
        if pairs[i].code != 0 {
            i += 1;
            continue;
        }
        let kind = pairs[i].value.clone();
        let start = i + 1;
        let mut end = start;
        while end < pairs.len() && pairs[end].code != 0 {
            end += 1;
        }
        let body = &pairs[start..end];
        match kind.as_str() {
            "LINE" => match parse_line(body)? {
                Ok((layer, shape)) => {
                    ensure_layer(layers, &layer);
                    obstacles.push(Obstacle { id: *next_id, shape, layer, circle: None });
                    *next_id += 1;
                }
                Err(msg) => warnings.push(msg),
            },
            "LWPOLYLINE" => match parse_lwpolyline(body)? {
                Ok((layer, shape)) => {
                    ensure_layer(layers, &layer);
                    obstacles.push(Obstacle { id: *next_id, shape, layer, circle: None });
                    *next_id += 1;
                }
                Err(msg) => warnings.push(msg),
            },
            "CIRCLE" => match parse_circle(body)? {
                Ok((layer, marker)) => {
                    ensure_layer(layers, &layer);
                    obstacles.push(Obstacle {
                        id: *next_id,
                        shape: tessellate_circle(marker.center, marker.radius),
                        layer,
                        circle: Some(marker),
                    });
                    *next_id += 1;
                }
                Err(msg) => warnings.push(msg),
            },
            other => warnings.push(format!("skipped {other}")),
        }
        i = end;
    }
    Ok(())
}

type EntityResult<T> = Result<Result<T, String>, DxfParseError>;

fn layer_of(body: &[Pair]) -> String {
    body.iter()
        .find(|p| p.code == 8)
        .map(|p| p.value.clone())
        .unwrap_or_else(|| "0".to_string())
}

fn parse_line(body: &[Pair]) -> EntityResult<(String, Polyline)> {
    let mut x1 = None;
    let mut y1 = None;
    let mut x2 = None;
    let mut y2 = None;
    for p in body {
        match p.code {
            10 => x1 = Some(parse_f64(p)?),
            20 => y1 = Some(parse_f64(p)?),
            11 => x2 = Some(parse_f64(p)?),
            21 => y2 = Some(parse_f64(p)?),
            _ => {}
        }
    }
    let (Some(x1), Some(y1), Some(x2), Some(y2)) = (x1, y1, x2, y2) else {
        return Ok(Err("skipped malformed LINE (missing coordinates)".to_string()));
    };
    match Polyline::open(vec![Point2::xy(x1, y1), Point2::xy(x2, y2)]) {
        Ok(shape) => Ok(Ok((layer_of(body), shape))),
        Err(e) => Ok(Err(format!("skipped degenerate LINE ({e})"))),
    }
}

fn parse_lwpolyline(body: &[Pair]) -> EntityResult<(String, Polyline)> {
    let mut declared: Option<usize> = None;
    let mut closed = false;
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for p in body {
        match p.code {
            90 => declared = Some(parse_f64(p)? as usize),
            70 => closed = parse_f64(p)? as i64 & 1 == 1,
            10 => xs.push(parse_f64(p)?),
            20 => ys.push(parse_f64(p)?),
            _ => {}
        }
    }
    if xs.len() != ys.len() {
        return Ok(Err("skipped malformed LWPOLYLINE (unpaired 10/20 codes)".to_string()));
    }
    if let Some(n) = declared {
        if n != xs.len() {
            return Ok(Err(format!(
                "skipped malformed LWPOLYLINE (declared {n} vertices, found {})",
                xs.len()
            )));
        }
    }
    let vertices: Vec<Point2> = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| Point2::xy(x, y))
        .collect();
    let built = if closed { Polyline::closed(vertices) } else { Polyline::open(vertices) };
    match built {
        Ok(shape) => Ok(Ok((layer_of(body), shape))),
        Err(e) => Ok(Err(format!("skipped invalid LWPOLYLINE ({e})"))),
    }
}

fn parse_circle(body: &[Pair]) -> EntityResult<(String, CircleMarker)> {
    let mut cx = None;
    let mut cy = None;
    let mut r = None;
    for p in body {
        match p.code {
            10 => cx = Some(parse_f64(p)?),
            20 => cy = Some(parse_f64(p)?),
            40 => r = Some(parse_f64(p)?),
            _ => {}
        }
    }
    let (Some(cx), Some(cy), Some(r)) = (cx, cy, r) else {
        return Ok(Err("skipped malformed CIRCLE (missing coordinates)".to_string()));
    };
    if r <= 0.0 {
        return Ok(Err(format!("skipped degenerate CIRCLE (radius {r})")));
    }
    Ok(Ok((layer_of(body), CircleMarker { center: Point2::xy(cx, cy), radius: r })))
}

/// Writes the environment back out; `parse_dxf_subset(export_dxf_subset(e))`
/// reproduces `e` up to obstacle ids.
pub fn export_dxf_subset(env: &Environment) -> String {
    let mut out = String::new();
    let mut pair = |code: i32, value: &str| {
        out.push_str(&format!("{code}\n{value}\n"));
    };

    pair(0, "SECTION");
    pair(2, "TABLES");
    pair(0, "TABLE");
    pair(2, "LAYER");
    for layer in &env.layers {
        pair(0, "LAYER");
        pair(2, &layer.name);
        pair(62, if layer.obstacle_active { "7" } else { "-7" });
    }
    pair(0, "ENDTAB");
    pair(0, "ENDSEC");

    pair(0, "SECTION");
    pair(2, "ENTITIES");
    for ob in &env.obstacles {
        if let Some(c) = ob.circle {
            pair(0, "CIRCLE");
            pair(8, &ob.layer);
            pair(10, &c.center.x.to_string());
            pair(20, &c.center.y.to_string());
            pair(40, &c.radius.to_string());
        } else if !ob.shape.closed && ob.shape.vertices.len() == 2 {
            pair(0, "LINE");
            pair(8, &ob.layer);
            pair(10, &ob.shape.vertices[0].x.to_string());
            pair(20, &ob.shape.vertices[0].y.to_string());
            pair(11, &ob.shape.vertices[1].x.to_string());
            pair(21, &ob.shape.vertices[1].y.to_string());
        } else {
            pair(0, "LWPOLYLINE");
            pair(8, &ob.layer);
            pair(90, &ob.shape.vertices.len().to_string());
            pair(70, if ob.shape.closed { "1" } else { "0" });
            for v in &ob.shape.vertices {
                pair(10, &v.x.to_string());
                pair(20, &v.y.to_string());
            }
        }
    }
    pair(0, "ENDSEC");
    pair(0, "EOF");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CIRCLE_SEGMENTS;

    fn dxf(entities: &str) -> String {
        format!("0\nSECTION\n2\nENTITIES\n{entities}0\nENDSEC\n0\nEOF\n")
    }

    #[test]
    fn single_line_on_named_layer() {
        let text = dxf("0\nLINE\n8\nWALLS\n10\n0\n20\n0\n11\n10\n21\n0\n");
        let (env, warnings) = parse_dxf_subset(&text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(env.obstacles.len(), 1);
        let ob = &env.obstacles[0];
        assert_eq!(ob.layer, "WALLS");
        assert!(!ob.shape.closed);
        assert!((ob.shape.length() - 10.0).abs() < 1e-12);
        assert!(env.layer("WALLS").unwrap().obstacle_active);
    }

    #[test]
    fn closed_unit_square_polyline() {
        let text = dxf(
            "0\nLWPOLYLINE\n8\n0\n90\n4\n70\n1\n10\n0\n20\n0\n10\n1\n20\n0\n10\n1\n20\n1\n10\n0\n20\n1\n",
        );
        let (env, warnings) = parse_dxf_subset(&text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(env.obstacles.len(), 1);
        assert!(env.obstacles[0].shape.closed);
        assert!((env.obstacles[0].shape.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_entity_is_skipped_with_warning() {
        let text = dxf(
            "0\nLINE\n8\nA\n10\n0\n20\n0\n11\n1\n21\n0\n0\nSPLINE\n10\n0\n20\n0\n",
        );
        let (env, warnings) = parse_dxf_subset(&text).unwrap();
        assert_eq!(env.obstacles.len(), 1);
        assert_eq!(warnings, vec!["skipped SPLINE".to_string()]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn circle_becomes_closed_32_gon() {
        let text = dxf("0\nCIRCLE\n8\nCOLS\n10\n5\n20\n5\n40\n2\n");
        let (env, _) = parse_dxf_subset(&text).unwrap();
        let ob = &env.obstacles[0];
        assert!(ob.shape.closed);
        assert_eq!(ob.shape.vertices.len(), CIRCLE_SEGMENTS);
        assert!(ob.circle.is_some());
        // All vertices lie on the circle.
        for v in &ob.shape.vertices {
            assert!((v.distance(&Point2::xy(5.0, 5.0)) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_line_count_reports_line_number() {
        let text = "0\nSECTION\n2\nENTITIES\n0\nENDSEC\n0\nEOF\n0";
        let err = parse_dxf_subset(text).unwrap_err();
        assert!(matches!(err, DxfParseError::UnpairedCode { line: 9 }));
    }

    #[test]
    fn non_numeric_code_reports_line_number() {
        let text = "0\nSECTION\nxx\nENTITIES\n";
        let err = parse_dxf_subset(text).unwrap_err();
        match err {
            DxfParseError::BadGroupCode { line, token } => {
                assert_eq!(line, 3);
                assert_eq!(token, "xx");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_entities_section_errors() {
        let text = "0\nSECTION\n2\nTABLES\n0\nENDSEC\n0\nEOF\n";
        assert!(matches!(parse_dxf_subset(text).unwrap_err(), DxfParseError::MissingEntities));
    }

    #[test]
    fn empty_environment_exports_empty_entities_section() {
        let text = export_dxf_subset(&Environment::empty());
        assert!(text.contains("2\nENTITIES\n0\nENDSEC"));
        let (env, warnings) = parse_dxf_subset(&text).unwrap();
        assert!(env.obstacles.is_empty());
        assert!(warnings.is_empty());
    }

    #[test]
    fn one_obstacle_exports_one_entity() {
        let text = dxf("0\nLINE\n8\nA\n10\n0\n20\n0\n11\n3\n21\n4\n");
        let (env, _) = parse_dxf_subset(&text).unwrap();
        let exported = export_dxf_subset(&env);
        assert_eq!(exported.matches("0\nLINE\n").count(), 1);
        assert_eq!(exported.matches("0\nLWPOLYLINE\n").count(), 0);
    }

    #[test]
    fn roundtrip_preserves_layers_and_geometry() {
        let text = format!(
            "0\nSECTION\n2\nTABLES\n0\nTABLE\n2\nLAYER\n0\nLAYER\n2\nREF\n62\n-7\n0\nENDTAB\n0\nENDSEC\n{}",
            dxf("0\nLINE\n8\nREF\n10\n0.125\n20\n-7.5\n11\n19.25\n21\n0.0625\n0\nCIRCLE\n8\nC\n10\n1.5\n20\n2.5\n40\n0.75\n")
        );
        let (env, _) = parse_dxf_subset(&text).unwrap();
        assert!(!env.layer("REF").unwrap().obstacle_active);
        let (env2, warnings) = parse_dxf_subset(&export_dxf_subset(&env)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(env, env2);
    }
}
