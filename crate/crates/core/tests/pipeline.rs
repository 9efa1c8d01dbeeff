use tablekb_core::extract::extract_with_rules;
use tablekb_core::kb::{entities_from_kb, link, parse_kb, serialize_kb, LinkKind, TableEntities};
use tablekb_core::metrics::strict_prf;
use tablekb_core::{Engine, ExtractedTuple, Property, Table};

fn article() -> Vec<Table> {
    let comp = Table::from_rows(
        "S0022309399000001",
        0,
        "Nominal compositions of the glasses (mol%)",
        &[
            &["Glass", "SiO2", "Na2O", "CaO"],
            &["NS1", "70", "20", "10"],
            &["NS2", "65", "25", "10"],
            &["NS3", "60", "30", "10"],
        ],
    );
    let props = Table::from_rows(
        "S0022309399000001",
        1,
        "Physical properties of the glasses",
        &[
            &["Glass", "Density (g/cm3)", "Tg (°C)"],
            &["NS1", "2.48", "545"],
            &["NS2", "2.51", "520"],
            &["NS3", "2.53", "498"],
        ],
    );
    vec![comp, props]
}

fn tuples(tables: &[TableEntities]) -> Vec<ExtractedTuple> {
    let mut out: Vec<ExtractedTuple> = tables.iter().flat_map(|t| t.tuples.clone()).collect();
    out.sort_by(|a, b| a.entity.cmp(&b.entity).then(a.property.cmp(&b.property)));
    out
}

#[test]
fn extract_link_and_read_back() {
    let engine = Engine::default();
    let extracted: Vec<TableEntities> = article()
        .iter()
        .map(|t| TableEntities::from(&extract_with_rules(t, &engine, None).unwrap()))
        .collect();
    assert_eq!(extracted[0].compositions.len(), 3);
    assert_eq!(extracted[1].tuples.len(), 6);
    let tg = extracted[1].tuples.iter().find(|t| t.property == Property::GlassTransitionTemperature).unwrap();
    assert_eq!(tg.unit, "degC");

    let records = link(&extracted);
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r.provenance.link_kind, LinkKind::Inter);
        assert_eq!(r.provenance.tables, vec![0, 1]);
        assert_eq!(r.properties.len(), 2);
    }
    assert_eq!(link(&extracted), records);

    let (bytes, index) = serialize_kb(&records).unwrap();
    assert!(bytes.starts_with(b"{\"schema\":\"tablekb.kb\",\"version\":1}\n"));
    assert!(!index.is_empty());
    let back = parse_kb(&bytes).unwrap();
    assert_eq!(back, records);

    let recovered = entities_from_kb(&back);
    let prf = strict_prf(&tuples(&recovered), &tuples(&extracted));
    assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
}
