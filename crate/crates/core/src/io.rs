//! CSV ingestion and CSV/GeoJSON emission.
//!
//! Input formats (header rows required, UTF-8):
//!   - edges: `edge_id,from_id,to_id,from_lon,from_lat,to_lon,to_lat,length_m,direction,road_class`
//!     with `direction` in {NB, SB, EB, WB, None} and `length_m` possibly empty
//!   - deliveries: `lon,lat[,timestamp]`
//!   - population: `lon,lat,ppp`
//!   - points (hubs, OD origins/destinations): `lon,lat`

use std::io::{Read, Write};

use serde_json::{json, Value};
use thiserror::Error;

use crate::demand::{DeliveryRecord, DemandPoint, PopulationCell};
use crate::geo::{GeoPoint, PlanarFrame};
use crate::hub_optimizer::{HubPlacement, IterationStats};
use crate::hull::convex_hull;
use crate::road_graph::{DirectionTag, DistanceMatrix, EdgeRecord, RoadClass};
use crate::scalar::{cast, to_f64, Scalar};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column {column:?}")]
    MissingColumn { column: String },
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
}

struct Columns {
    names: Vec<String>,
}

impl Columns {
    fn from_headers(headers: &csv::StringRecord) -> Self {
        Self {
            names: headers.iter().map(|h| h.trim().to_string()).collect(),
        }
    }

    fn required(&self, name: &str) -> Result<usize, FormatError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| FormatError::MissingColumn {
                column: name.to_string(),
            })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn row_number(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn field<'a>(
    record: &'a csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'a str, FormatError> {
    record.get(idx).map(str::trim).ok_or_else(|| FormatError::Row {
        row: row_number(record),
        message: format!("missing field {name:?}"),
    })
}

fn parse_scalar<T: Scalar>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, FormatError> {
    let raw = field(record, idx, name)?;
    let value: f64 = raw.parse().map_err(|_| FormatError::Row {
        row: row_number(record),
        message: format!("cannot parse {name:?} from {raw:?}"),
    })?;
    Ok(cast(value))
}

fn parse_int(record: &csv::StringRecord, idx: usize, name: &str) -> Result<u64, FormatError> {
    let raw = field(record, idx, name)?;
    raw.parse().map_err(|_| FormatError::Row {
        row: row_number(record),
        message: format!("cannot parse {name:?} from {raw:?}"),
    })
}

fn parse_point<T: Scalar>(
    record: &csv::StringRecord,
    lon_idx: usize,
    lat_idx: usize,
    prefix: &str,
) -> Result<GeoPoint<T>, FormatError> {
    let lon = parse_scalar(record, lon_idx, &format!("{prefix}lon"))?;
    let lat = parse_scalar(record, lat_idx, &format!("{prefix}lat"))?;
    GeoPoint::new(lon, lat).map_err(|e| FormatError::Row {
        row: row_number(record),
        message: e.to_string(),
    })
}

/// Reads the edge CSV into records ready for graph construction.
pub fn read_edges_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<EdgeRecord<T>>, FormatError> {
    let mut csv = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(csv.headers()?);
    let edge_id_idx = cols.required("edge_id")?;
    let from_id_idx = cols.required("from_id")?;
    let to_id_idx = cols.required("to_id")?;
    let from_lon_idx = cols.required("from_lon")?;
    let from_lat_idx = cols.required("from_lat")?;
    let to_lon_idx = cols.required("to_lon")?;
    let to_lat_idx = cols.required("to_lat")?;
    let length_idx = cols.required("length_m")?;
    let direction_idx = cols.required("direction")?;
    let class_idx = cols.required("road_class")?;

    let mut records = Vec::new();
    for result in csv.records() {
        let record = result?;
        let row = row_number(&record);
        let direction = match field(&record, direction_idx, "direction")? {
            "None" => None,
            "NB" => Some(DirectionTag::NorthBound),
            "SB" => Some(DirectionTag::SouthBound),
            "EB" => Some(DirectionTag::EastBound),
            "WB" => Some(DirectionTag::WestBound),
            other => {
                return Err(FormatError::Row {
                    row,
                    message: format!("unknown direction token {other:?}"),
                });
            }
        };
        let class_raw = field(&record, class_idx, "road_class")?;
        let road_class: RoadClass = class_raw.parse().map_err(|e| FormatError::Row {
            row,
            message: e,
        })?;
        let length_m = if field(&record, length_idx, "length_m")?.is_empty() {
            None
        } else {
            Some(parse_scalar(&record, length_idx, "length_m")?)
        };
        records.push(EdgeRecord {
            edge_id: parse_int(&record, edge_id_idx, "edge_id")?,
            from: parse_int(&record, from_id_idx, "from_id")?,
            to: parse_int(&record, to_id_idx, "to_id")?,
            from_pos: parse_point(&record, from_lon_idx, from_lat_idx, "from_")?,
            to_pos: parse_point(&record, to_lon_idx, to_lat_idx, "to_")?,
            length_m,
            direction,
            road_class,
        });
    }
    Ok(records)
}

/// Reads delivery rows: `lon,lat` with an optional `timestamp` column.
pub fn read_deliveries_csv<T: Scalar, R: Read>(
    reader: R,
) -> Result<Vec<DeliveryRecord<T>>, FormatError> {
    let mut csv = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(csv.headers()?);
    let lon = cols.required("lon")?;
    let lat = cols.required("lat")?;
    let timestamp = cols.optional("timestamp");

    let mut records = Vec::new();
    for result in csv.records() {
        let record = result?;
        records.push(DeliveryRecord {
            pos: parse_point(&record, lon, lat, "")?,
            timestamp: timestamp
                .and_then(|idx| record.get(idx))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from),
        });
    }
    Ok(records)
}

/// Reads population cells: `lon,lat,ppp`.
pub fn read_population_csv<T: Scalar, R: Read>(
    reader: R,
) -> Result<Vec<PopulationCell<T>>, FormatError> {
    let mut csv = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(csv.headers()?);
    let lon = cols.required("lon")?;
    let lat = cols.required("lat")?;
    let ppp = cols.required("ppp")?;

    let mut cells = Vec::new();
    for result in csv.records() {
        let record = result?;
        let row = row_number(&record);
        let ppp: T = parse_scalar(&record, ppp, "ppp")?;
        if !(ppp.is_finite() && ppp >= T::zero()) {
            return Err(FormatError::Row {
                row,
                message: format!("ppp must be non-negative and finite, got {}", to_f64(ppp)),
            });
        }
        cells.push(PopulationCell {
            center: parse_point(&record, lon, lat, "")?,
            ppp,
        });
    }
    Ok(cells)
}

/// Reads bare points: `lon,lat`. Extra columns are ignored.
pub fn read_points_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<GeoPoint<T>>, FormatError> {
    let mut csv = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(csv.headers()?);
    let lon = cols.required("lon")?;
    let lat = cols.required("lat")?;

    let mut points = Vec::new();
    for result in csv.records() {
        let record = result?;
        points.push(parse_point(&record, lon, lat, "")?);
    }
    Ok(points)
}

/// Writes the dense OD matrix, one origin per row. Unreachable entries are
/// the literal `inf`.
pub fn write_od_csv<T: Scalar, W: Write>(
    mut writer: W,
    matrix: &DistanceMatrix<T>,
) -> Result<(), FormatError> {
    for o in 0..matrix.origins().len() {
        let row: Vec<String> = matrix.row(o).iter().map(|d| format!("{d}")).collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes `iteration,objective_m` rows.
pub fn write_objective_csv<T: Scalar, W: Write>(
    mut writer: W,
    iterations: &[IterationStats<T>],
) -> Result<(), FormatError> {
    writeln!(writer, "iteration,objective_m")?;
    for stats in iterations {
        writeln!(writer, "{},{}", stats.iteration, stats.objective_m)?;
    }
    Ok(())
}

/// Writes the per-demand assignment table. Dropped demand gets empty cluster
/// and hub columns.
pub fn write_assignment_csv<T: Scalar, W: Write>(
    mut writer: W,
    demand: &[DemandPoint<T>],
    assignment: &[Option<usize>],
    hubs: &[HubPlacement<T>],
) -> Result<(), FormatError> {
    writeln!(writer, "demand_id,lon,lat,node,count,weight,cluster,hub_node")?;
    for d in demand {
        let (cluster, hub_node) = match assignment[d.id] {
            Some(c) => (c.to_string(), hubs[c].node.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            d.id, d.pos.lon, d.pos.lat, d.node, d.count, d.weight, cluster, hub_node
        )?;
    }
    Ok(())
}

/// GeoJSON FeatureCollection of hub points (WGS84 lon-lat).
pub fn hubs_geojson<T: Scalar>(hubs: &[HubPlacement<T>]) -> Value {
    let features: Vec<Value> = hubs
        .iter()
        .map(|h| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [to_f64(h.pos.lon), to_f64(h.pos.lat)],
                },
                "properties": {
                    "cluster": h.cluster,
                    "node": h.node,
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// GeoJSON FeatureCollection with one convex-hull feature per cluster.
///
/// Hulls are computed in the projected plane and unprojected back. Clusters
/// with one member emit a Point, two (or collinear) members a LineString,
/// and three or more a Polygon with a closed counter-clockwise ring.
pub fn clusters_geojson<T: Scalar>(
    frame: &PlanarFrame<T>,
    demand: &[DemandPoint<T>],
    assignment: &[Option<usize>],
    cluster_count: usize,
) -> Value {
    let mut features = Vec::new();
    for cluster in 0..cluster_count {
        let members: Vec<(T, T)> = demand
            .iter()
            .filter(|d| assignment[d.id] == Some(cluster))
            .map(|d| frame.project(d.pos))
            .collect();
        if members.is_empty() {
            continue;
        }
        let hull = convex_hull(&members).expect("non-empty cluster");
        let coords: Vec<[f64; 2]> = hull
            .iter()
            .map(|&(x, y)| {
                let p = frame.unproject(x, y);
                [to_f64(p.lon), to_f64(p.lat)]
            })
            .collect();
        let geometry = match coords.len() {
            1 => json!({ "type": "Point", "coordinates": coords[0] }),
            2 => json!({ "type": "LineString", "coordinates": coords }),
            _ => {
                let mut ring = coords.clone();
                ring.push(ring[0]); // close the ring
                json!({ "type": "Polygon", "coordinates": [ring] })
            }
        };
        features.push(json!({
            "type": "Feature",
            "geometry": geometry,
            "properties": { "cluster": cluster, "size": members.len() },
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}
