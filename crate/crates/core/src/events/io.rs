use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Event, EventStream, EventsError, Polarity};

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream, EventsError> {
    read_events_from(File::open(path)?)
}

pub fn read_events_from(reader: impl Read) -> Result<EventStream, EventsError> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(EventsError::MalformedHeader("empty file".into())),
    };
    let (width, height) = parse_header(&header)?;

    let mut events = Vec::new();
    let mut last_t = 0u64;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let index = events.len();
        let e = parse_record(&line).ok_or_else(|| EventsError::MalformedRecord { index, line: line.clone() })?;
        if e.x as usize >= width || e.y as usize >= height {
            return Err(EventsError::OutOfBounds { index, x: e.x, y: e.y });
        }
        if e.t < last_t {
            return Err(EventsError::NonMonotone { index, t: e.t, previous: last_t });
        }
        last_t = e.t;
        events.push(e);
    }
    EventStream::new(width, height, events)
}

fn parse_header(line: &str) -> Result<(usize, usize), EventsError> {
    let fields: Vec<&str> = line.split(' ').collect();
    let bad = || EventsError::MalformedHeader(line.to_string());
    if fields.len() != 2 {
        return Err(bad());
    }
    let w: usize = fields[0].parse().map_err(|_| bad())?;
    let h: usize = fields[1].parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn parse_record(line: &str) -> Option<Event> {
    let mut it = line.split(' ');
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    let t = it.next()?.parse().ok()?;
    let p = Polarity::from_sign(it.next()?.parse().ok()?)?;
    if it.next().is_some() {
        return None;
    }
    Some(Event { x, y, t, p })
}

pub fn write_events(stream: &EventStream, path: impl AsRef<Path>) -> Result<(), EventsError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_events_to(stream, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_events_to(stream: &EventStream, mut w: impl Write) -> Result<(), EventsError> {
    writeln!(w, "{} {}", stream.width(), stream.height())?;
    for e in stream.events() {
        writeln!(w, "{} {} {} {}", e.x, e.y, e.t, e.p.sign())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<EventStream, EventsError> {
        read_events_from(s.as_bytes())
    }

    #[test]
    fn single_record() {
        let s = parse("4 4\n1 2 100 1\n").unwrap();
        assert_eq!((s.width(), s.height()), (4, 4));
        assert_eq!(s.events(), &[Event::new(1, 2, 100, Polarity::Positive)]);
    }

    #[test]
    fn empty_event_section() {
        assert!(parse("4 4\n").unwrap().is_empty());
        assert!(parse("4 4").unwrap().is_empty());
    }

    #[test]
    fn out_of_bounds_names_record() {
        match parse("4 4\n9 0 50 1\n") {
            Err(EventsError::OutOfBounds { index: 0, x: 9, y: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(parse("4\n"), Err(EventsError::MalformedHeader(_))));
        assert!(matches!(parse("4 x\n"), Err(EventsError::MalformedHeader(_))));
        assert!(matches!(parse(""), Err(EventsError::MalformedHeader(_))));
        assert!(matches!(
            parse("4 4\n0 0 5 1\n0 0 1 1\n"),
            Err(EventsError::NonMonotone { index: 1, .. })
        ));
        assert!(matches!(
            parse("4 4\n0 0 5 1\n0 0 6 0\n"),
            Err(EventsError::MalformedRecord { index: 1, .. })
        ));
        assert!(matches!(
            parse("4 4\n0 0 5 1 7\n"),
            Err(EventsError::MalformedRecord { index: 0, .. })
        ));
    }

    #[test]
    fn negative_polarity_encoding() {
        let s = EventStream::new(2, 2, vec![Event::new(1, 1, 3, Polarity::Negative)]).unwrap();
        let mut buf = Vec::new();
        write_events_to(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "2 2\n1 1 3 -1\n");
        assert_eq!(read_events_from(&buf[..]).unwrap().events()[0].p, Polarity::Negative);
    }

    #[test]
    fn empty_stream_writes_header_only() {
        let s = EventStream::new(7, 3, vec![]).unwrap();
        let mut buf = Vec::new();
        write_events_to(&s, &mut buf).unwrap();
        assert_eq!(buf, b"7 3\n");
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        (1usize..50, 1usize..50).prop_flat_map(|(w, h)| {
            prop::collection::vec((0..w as u32, 0..h as u32, 0u64..1000, any::<bool>()), 0..40).prop_map(
                move |raw| {
                    let mut t = 0;
                    let events = raw
                        .into_iter()
                        .map(|(x, y, dt, pos)| {
                            t += dt;
                            Event::new(x, y, t, if pos { Polarity::Positive } else { Polarity::Negative })
                        })
                        .collect();
                    EventStream::new(w, h, events).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(s in arb_stream()) {
            let mut buf = Vec::new();
            write_events_to(&s, &mut buf).unwrap();
            let back = read_events_from(&buf[..]).unwrap();
            let mut buf2 = Vec::new();
            write_events_to(&back, &mut buf2).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(buf, buf2);
        }
    }
}
