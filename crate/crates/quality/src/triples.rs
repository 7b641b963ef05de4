//! Line-oriented triple export of assessed observations, one
//! `subject predicate object .` statement per line with SOSA and IDQA
//! property names.

use std::io::Write;

use crate::store::AssessedObservation;

fn lit(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn typed(v: impl std::fmt::Display, ty: &str) -> String {
    format!("\"{v}\"^^xsd:{ty}")
}

pub fn observation_triples(o: &AssessedObservation) -> Vec<(String, &'static str, String)> {
    let s = format!("<{}>", o.obs.uri);
    let q = format!("<{}#quality>", o.obs.uri);
    let mut t = vec![
        (s.clone(), "rdf:type", "sosa:Observation".to_owned()),
        (s.clone(), "sosa:madeBySensor", lit(&o.obs.sensor)),
        (s.clone(), "sosa:hasFeatureOfInterest", lit(&o.obs.foi)),
        (s.clone(), "sosa:observedProperty", lit(&o.obs.property)),
        (
            s.clone(),
            "sosa:hasResult",
            match o.obs.value {
                Some(v) => typed(v, "double"),
                None => lit("nan"),
            },
        ),
        (s.clone(), "qudt-unit-1-1:unit", lit(&o.obs.unit)),
        (s.clone(), "sosa:resultTime", typed(o.obs.t_new, "integer")),
        (s.clone(), "ssn-system:qualityOfObservation", q.clone()),
        (q.clone(), "idqa:numOfDuplicates", typed(o.result.num_of_duplicates, "integer")),
    ];
    if let Some(d) = o.result.transmission_delay {
        t.push((q.clone(), "idqa:transmissionDelay", typed(d, "integer")));
    }
    if let Some(d) = o.result.time_delay {
        t.push((q.clone(), "idqa:timeDelay", typed(d, "integer")));
    }
    if let Some(b) = o.result.is_out_of_range {
        t.push((q, "idqa:isOutOfRange", typed(b, "boolean")));
    }
    t
}

pub fn write_triples<'a, W: Write>(mut w: W, obs: impl IntoIterator<Item = &'a AssessedObservation>) -> std::io::Result<usize> {
    let mut n = 0;
    for o in obs {
        for (s, p, v) in observation_triples(o) {
            writeln!(w, "{s} {p} {v} .")?;
            n += 1;
        }
    }
    Ok(n)
}
