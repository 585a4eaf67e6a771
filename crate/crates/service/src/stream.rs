//! Server-sent event feed of a session transcript.
//!
//! Event ids are transcript indices. A client resuming with
//! `Last-Event-ID: n` receives events `n+1..` and then live events, each
//! exactly once. The stream finishes after the session-ended event.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::response::sse::{Event, KeepAlive, Sse};
use futures::stream::{self, Stream};
use mitigator_core::engine::{EventKind, SessionEvent};
use tokio::sync::broadcast::{self, error::RecvError};

use crate::Slot;

struct Feed {
    slot: Arc<Slot>,
    rx: broadcast::Receiver<(usize, SessionEvent)>,
    next: usize,
    backlog: VecDeque<(usize, SessionEvent)>,
    done: bool,
}

impl Feed {
    async fn refill(&mut self) {
        let live = self.slot.session.lock().await;
        let transcript = live.session.transcript();
        self.backlog.extend(
            transcript
                .iter()
                .enumerate()
                .skip(self.next)
                .map(|(i, e)| (i, e.clone())),
        );
    }

    async fn pull(&mut self) -> Option<(usize, SessionEvent)> {
        loop {
            if let Some(item) = self.backlog.pop_front() {
                return Some(item);
            }
            match self.rx.recv().await {
                Ok((i, _)) if i < self.next => {}
                Ok((i, e)) if i == self.next => return Some((i, e)),
                Ok(_) | Err(RecvError::Lagged(_)) => self.refill().await,
                Err(RecvError::Closed) => return None,
            }
        }
    }
}

fn to_sse((index, event): &(usize, SessionEvent)) -> Event {
    Event::default()
        .id(index.to_string())
        .event(event.kind.name())
        .data(serde_json::to_string(event).expect("events serialize"))
}

pub(crate) async fn event_stream(slot: Arc<Slot>, resume: usize) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    // Subscribe while holding the session lock so that no event falls
    // between the backlog snapshot and the live channel.
    let feed = {
        let live = slot.session.lock().await;
        let rx = slot.events.subscribe();
        let backlog = live
            .session
            .transcript()
            .iter()
            .enumerate()
            .skip(resume)
            .map(|(i, e)| (i, e.clone()))
            .collect();
        drop(live);
        Feed {
            slot: Arc::clone(&slot),
            rx,
            next: resume,
            backlog,
            done: false,
        }
    };
    let events = stream::unfold(feed, |mut feed| async move {
        if feed.done {
            return None;
        }
        let item = feed.pull().await?;
        feed.next = item.0 + 1;
        feed.done = matches!(item.1.kind, EventKind::SessionEnded(_));
        Some((Ok(to_sse(&item)), feed))
    });
    Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}
