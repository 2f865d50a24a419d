//! Bounded blocking FIFO with blocked-time accounting.

use std::sync::mpsc::{self, Receiver, SyncSender, TryRecvError, TrySendError};
use std::time::{Duration, Instant};

/// The other end of the queue is gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disconnected;

pub struct TimedSender<T> {
    tx: SyncSender<T>,
    blocked: Duration,
    pushed: u64,
}

pub struct TimedReceiver<T> {
    rx: Receiver<T>,
    blocked: Duration,
    popped: u64,
}

/// A queue holding at most `depth` items.
pub fn bounded<T>(depth: usize) -> (TimedSender<T>, TimedReceiver<T>) {
    assert!(depth >= 1, "queue depth must be at least 1");
    let (tx, rx) = mpsc::sync_channel(depth);
    (
        TimedSender {
            tx,
            blocked: Duration::ZERO,
            pushed: 0,
        },
        TimedReceiver {
            rx,
            blocked: Duration::ZERO,
            popped: 0,
        },
    )
}

impl<T> TimedSender<T> {
    /// Blocks while the queue is full. Time from the first failed attempt to
    /// the successful transfer is charged to this sender.
    pub fn push(&mut self, item: T) -> Result<(), Disconnected> {
        match self.tx.try_send(item) {
            Ok(()) => {}
            Err(TrySendError::Disconnected(_)) => return Err(Disconnected),
            Err(TrySendError::Full(item)) => {
                let t0 = Instant::now();
                let sent = self.tx.send(item);
                self.blocked += t0.elapsed();
                sent.map_err(|_| Disconnected)?;
            }
        }
        self.pushed += 1;
        Ok(())
    }

    pub fn blocked(&self) -> Duration {
        self.blocked
    }

    pub fn pushed(&self) -> u64 {
        self.pushed
    }
}

impl<T> TimedReceiver<T> {
    /// Blocks while the queue is empty; `Err` once it is empty and the
    /// sender is gone.
    pub fn pop(&mut self) -> Result<T, Disconnected> {
        let item = match self.rx.try_recv() {
            Ok(item) => item,
            Err(TryRecvError::Disconnected) => return Err(Disconnected),
            Err(TryRecvError::Empty) => {
                let t0 = Instant::now();
                let got = self.rx.recv();
                self.blocked += t0.elapsed();
                got.map_err(|_| Disconnected)?
            }
        };
        self.popped += 1;
        Ok(item)
    }

    pub fn blocked(&self) -> Duration {
        self.blocked
    }

    pub fn popped(&self) -> u64 {
        self.popped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn fifo_order_and_counts() {
        let (mut tx, mut rx) = bounded::<u32>(2);
        let h = thread::spawn(move || {
            for i in 0..100 {
                tx.push(i).unwrap();
            }
            tx.pushed()
        });
        let got: Vec<u32> = (0..100).map(|_| rx.pop().unwrap()).collect();
        assert_eq!(got, (0..100).collect::<Vec<_>>());
        assert_eq!(h.join().unwrap(), 100);
        assert_eq!(rx.popped(), 100);
        assert_eq!(rx.pop(), Err(Disconnected));
    }

    #[test]
    fn full_queue_blocks_producer() {
        let (mut tx, mut rx) = bounded::<u32>(1);
        let h = thread::spawn(move || {
            tx.push(1).unwrap();
            tx.push(2).unwrap();
            tx.blocked()
        });
        thread::sleep(Duration::from_millis(30));
        rx.pop().unwrap();
        rx.pop().unwrap();
        assert!(h.join().unwrap() >= Duration::from_millis(10));
    }

    #[test]
    fn dropped_receiver_disconnects() {
        let (mut tx, rx) = bounded::<u32>(1);
        drop(rx);
        assert_eq!(tx.push(1), Err(Disconnected));
    }
}
