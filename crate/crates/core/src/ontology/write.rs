use std::fmt::Write;

use super::{AttributeKind, Expr, Ontology, SegmentationForm, TemporalPredicate};
use crate::time::format_timestamp;
use crate::xml::{escape_attr, escape_text};

const WEEKDAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

impl Ontology {
    /// Serializes to the same XML schema `parse_ontology` reads.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<ontology>\n");
        for c in self.clusters() {
            let _ = writeln!(out, "  <cluster name=\"{}\">", escape_attr(&c.name));
            for t in &c.terms {
                if t.notes.is_empty() {
                    let _ = writeln!(out, "    <term>{}</term>", escape_text(&t.phrase));
                } else {
                    let _ = writeln!(
                        out,
                        "    <term notes=\"{}\">{}</term>",
                        escape_attr(&t.notes),
                        escape_text(&t.phrase)
                    );
                }
            }
            out.push_str("  </cluster>\n");
        }
        for a in self.attributes() {
            let kind = match a.kind {
                AttributeKind::TextMining { .. } => "textmining",
                AttributeKind::Temporal(_) => "temporal",
                AttributeKind::Compound(_) => "compound",
            };
            let _ = writeln!(out, "  <attribute kind=\"{kind}\" name=\"{}\">", escape_attr(&a.name));
            match &a.kind {
                AttributeKind::TextMining { cluster, sections } => {
                    let names: Vec<_> = sections.iter().map(|s| s.as_str()).collect();
                    let _ = writeln!(out, "    <clusterRef name=\"{}\"/>", escape_attr(cluster));
                    let _ = writeln!(out, "    <sections>{}</sections>", names.join(" "));
                }
                AttributeKind::Temporal(TemporalPredicate::Window { from, to }) => {
                    out.push_str("    <window");
                    if let Some(f) = from {
                        let _ = write!(out, " from=\"{}\"", format_timestamp(f));
                    }
                    if let Some(t) = to {
                        let _ = write!(out, " to=\"{}\"", format_timestamp(t));
                    }
                    out.push_str("/>\n");
                }
                AttributeKind::Temporal(TemporalPredicate::Periodic { weekdays, hours }) => {
                    out.push_str("    <periodic");
                    if let Some(days) = weekdays {
                        let names: Vec<_> = days.iter().map(|&d| WEEKDAYS[d as usize]).collect();
                        let _ = write!(out, " weekdays=\"{}\"", names.join(","));
                    }
                    if let Some(h) = hours {
                        let _ = write!(out, " hours=\"{}-{}\"", h.start, h.end);
                    }
                    out.push_str("/>\n");
                }
                AttributeKind::Compound(expr) => write_expr(&mut out, expr, 2),
            }
            out.push_str("  </attribute>\n");
        }
        for r in self.object_cluster_rules() {
            let _ = writeln!(
                out,
                "  <objectCluster name=\"{}\" key=\"{}\" missing=\"{}\"/>",
                escape_attr(&r.name),
                escape_attr(&r.key.render()),
                r.missing.as_str()
            );
        }
        for r in self.segmentation_rules() {
            let _ = writeln!(out, "  <segmentation name=\"{}\">", escape_attr(&r.name));
            match &r.form {
                SegmentationForm::Predicate(expr) => write_expr(&mut out, expr, 2),
                SegmentationForm::Intervals(ivs) => {
                    for iv in ivs {
                        let _ = writeln!(
                            out,
                            "    <interval label=\"{}\" from=\"{}\" to=\"{}\"/>",
                            escape_attr(&iv.label),
                            format_timestamp(&iv.from),
                            format_timestamp(&iv.to)
                        );
                    }
                }
            }
            out.push_str("  </segmentation>\n");
        }
        out.push_str("</ontology>\n");
        out
    }
}

fn write_expr(out: &mut String, expr: &Expr, level: usize) {
    let pad = "  ".repeat(level);
    match expr {
        Expr::Ref(name) => {
            let _ = writeln!(out, "{pad}<ref name=\"{}\"/>", escape_attr(name));
        }
        Expr::Not(inner) => {
            let _ = writeln!(out, "{pad}<not>");
            write_expr(out, inner, level + 1);
            let _ = writeln!(out, "{pad}</not>");
        }
        Expr::And(ops) | Expr::Or(ops) => {
            let tag = if matches!(expr, Expr::And(_)) { "and" } else { "or" };
            let _ = writeln!(out, "{pad}<{tag}>");
            for op in ops {
                write_expr(out, op, level + 1);
            }
            let _ = writeln!(out, "{pad}</{tag}>");
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::ontology::parse_ontology;

    #[test]
    fn round_trips_through_xml() {
        let src = r#"<ontology>
            <cluster name="KD &amp; co"><term notes="n">data mining</term><term>KDD</term></cluster>
            <attribute kind="textmining" name="kd"><clusterRef name="KD &amp; co"/><sections>abstract title</sections></attribute>
            <attribute kind="temporal" name="w"><window from="2005-01-01" to="2010-01-01"/></attribute>
            <attribute kind="temporal" name="p"><periodic weekdays="fri,sat" hours="22-6"/></attribute>
            <attribute kind="compound" name="c"><and><ref name="kd"/><or><ref name="w"/><not><ref name="p"/></not></or></and></attribute>
            <objectCluster name="per_person" key="field:person" missing="error"/>
            <segmentation name="y"><interval label="a" from="2005-01-01" to="2006-01-01"/></segmentation>
            <segmentation name="q"><ref name="c"/></segmentation>
        </ontology>"#;
        let ont = parse_ontology(src).unwrap();
        let again = parse_ontology(&ont.to_xml()).unwrap();
        assert_eq!(ont, again);
    }
}
