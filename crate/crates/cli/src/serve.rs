//! Console server: one live session at a time; a session's socket I/O and
//! its executor run on separate threads and talk over channels.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::Args;
use robotask::executor::{
    ActionOutcome, Dispatch, EnvironmentPort, ExecutorConfig, Notification, PortError, RunStatus,
    Session,
};
use robotask::model::RobotModel;
use robotask::protocol::{action_prompt, outcome_for, ClientMessage, ServerMessage};
use robotask::task::{PromptRequest, TaskProgram};
use tungstenite::{Message, WebSocket};

use crate::{load_task, ModelArgs};

const POLL: Duration = Duration::from_millis(20);

#[derive(Args)]
pub struct ServeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Task program file or bundled task name.
    #[arg(long)]
    task: String,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// Seconds to wait for an action answer before treating it as a timeout.
    #[arg(long)]
    prompt_timeout: Option<f64>,
    /// Exit after the first session, with its exit code.
    #[arg(long)]
    once: bool,
}

struct Shared {
    model: RobotModel,
    program: TaskProgram,
    config: ExecutorConfig,
    prompt_timeout: Option<Duration>,
}

pub fn cmd_serve(args: &ServeArgs) -> Result<i32> {
    let shared = Arc::new(Shared {
        model: args.model.load()?,
        program: load_task(Some(&args.task), None)?,
        config: args.model.config(),
        prompt_timeout: args.prompt_timeout.map(Duration::from_secs_f64),
    });
    let listener = TcpListener::bind((args.bind.as_str(), args.port))
        .with_context(|| format!("cannot bind {}:{}", args.bind, args.port))?;
    listener.set_nonblocking(true)?;
    eprintln!("listening on ws://{}", listener.local_addr()?);
    let busy = Arc::new(AtomicBool::new(false));
    let mut first: Option<thread::JoinHandle<i32>> = None;
    loop {
        if args.once && first.as_ref().is_some_and(|h| h.is_finished()) {
            return Ok(first.take().unwrap().join().unwrap_or(2));
        }
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                thread::sleep(POLL);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        stream.set_nonblocking(false)?;
        if busy.swap(true, Ordering::SeqCst) || (args.once && first.is_some()) {
            thread::spawn(move || reject(stream));
            continue;
        }
        let shared = Arc::clone(&shared);
        let busy = Arc::clone(&busy);
        let handle = thread::spawn(move || {
            let code = serve_session(stream, &shared).unwrap_or_else(|e| {
                eprintln!("session error: {e:#}");
                2
            });
            busy.store(false, Ordering::SeqCst);
            code
        });
        if args.once {
            first = Some(handle);
        }
    }
}

fn reject(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let msg = ServerMessage::Error {
            message: "busy: another session is running".into(),
        };
        let _ = ws.send(Message::text(msg.to_json()));
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> bool {
    ws.send(Message::text(msg.to_json())).is_ok()
}

/// Socket side of a session; returns the executor's exit code.
fn serve_session(stream: TcpStream, shared: &Arc<Shared>) -> Result<i32> {
    let mut ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("handshake: {e}"))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let (out_tx, out_rx) = mpsc::channel::<ServerMessage>();
    let (in_tx, in_rx) = mpsc::channel::<ClientMessage>();
    let exec_shared = Arc::clone(shared);
    let executor = thread::spawn(move || run_executor(&exec_shared, out_tx, in_rx));
    let mut in_tx = Some(in_tx);
    'io: loop {
        loop {
            match out_rx.try_recv() {
                Ok(m) => {
                    if !send(&mut ws, &m) {
                        break 'io;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    break 'io;
                }
            }
        }
        match ws.read() {
            Ok(Message::Text(t)) => match ClientMessage::parse(&t) {
                Ok(m) => {
                    if let Some(tx) = &in_tx {
                        let _ = tx.send(m);
                    }
                }
                Err(message) => {
                    send(&mut ws, &ServerMessage::Error { message });
                }
            },
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
            {
                let _ = ws.flush();
            }
            Err(_) => break,
        }
    }
    // a vanished client shows up in the executor as a disconnected port
    in_tx.take();
    Ok(executor.join().unwrap_or(2))
}

fn run_executor(
    shared: &Shared,
    out: Sender<ServerMessage>,
    inbox: Receiver<ClientMessage>,
) -> i32 {
    let mut port = WsPort {
        out: out.clone(),
        inbox,
        next_id: 0,
        paused: false,
        timeout: shared.prompt_timeout,
    };
    let mut session = Session::new(&shared.model, &shared.program, shared.config.clone());
    let notify_out = out.clone();
    let status = session.run(&mut port, &mut |n| {
        let msg = match n {
            Notification::Event(e) => ServerMessage::Event { event: e.clone() },
            Notification::Belief { t, belief } => ServerMessage::belief(t, belief),
        };
        let _ = notify_out.send(msg);
    });
    let code = status.exit_code();
    let last = match status {
        RunStatus::Done => ServerMessage::Done { exit_code: code },
        RunStatus::Unrecoverable(reason) => ServerMessage::Abort {
            reason,
            exit_code: code,
        },
        RunStatus::RetryLimit => ServerMessage::Abort {
            reason: "retry limit exceeded".into(),
            exit_code: code,
        },
    };
    let _ = out.send(last);
    code
}

struct WsPort {
    out: Sender<ServerMessage>,
    inbox: Receiver<ClientMessage>,
    next_id: u64,
    paused: bool,
    timeout: Option<Duration>,
}

fn gone() -> PortError {
    PortError::Disconnected("console closed the connection".into())
}

impl WsPort {
    fn error(&self, message: String) {
        let _ = self.out.send(ServerMessage::Error { message });
    }

    fn control(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::Pause => self.paused = true,
            ClientMessage::Resume => self.paused = false,
            ClientMessage::Answer { id, .. } => self.error(format!("no open prompt {id}")),
        }
    }

    /// Handle queued messages, then block while paused.
    fn settle(&mut self) -> Result<(), PortError> {
        loop {
            match self.inbox.try_recv() {
                Ok(m) => self.control(m),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Err(gone()),
            }
        }
        while self.paused {
            let m = self.inbox.recv().map_err(|_| gone())?;
            self.control(m);
        }
        Ok(())
    }

    /// Send a prompt and wait for a valid answer; `None` on timeout.
    fn ask(
        &mut self,
        text: String,
        buttons: Vec<String>,
        timeout: Option<Duration>,
    ) -> Result<Option<String>, PortError> {
        self.settle()?;
        self.next_id += 1;
        let id = self.next_id;
        let _ = self.out.send(ServerMessage::Prompt {
            id,
            text,
            buttons: buttons.clone(),
        });
        let mut deadline = timeout.map(|d| Instant::now() + d);
        loop {
            let msg = match deadline.filter(|_| !self.paused) {
                Some(d) => match self
                    .inbox
                    .recv_timeout(d.saturating_duration_since(Instant::now()))
                {
                    Ok(m) => m,
                    Err(RecvTimeoutError::Timeout) => return Ok(None),
                    Err(RecvTimeoutError::Disconnected) => return Err(gone()),
                },
                None => self.inbox.recv().map_err(|_| gone())?,
            };
            match msg {
                ClientMessage::Answer { id: a, button } if a == id => {
                    if self.paused {
                        self.error("session is paused".into());
                    } else if buttons.contains(&button) {
                        return Ok(Some(button));
                    } else {
                        self.error(format!("`{button}` is not a button of prompt {id}"));
                    }
                }
                ClientMessage::Resume => {
                    self.paused = false;
                    deadline = timeout.map(|d| Instant::now() + d);
                }
                other => self.control(other),
            }
        }
    }
}

impl EnvironmentPort for WsPort {
    fn execute(&mut self, dispatch: &Dispatch<'_>) -> Result<ActionOutcome, PortError> {
        let (text, buttons) = action_prompt(dispatch);
        Ok(match self.ask(text, buttons, self.timeout)? {
            Some(b) => outcome_for(&b).expect("offered button"),
            None => ActionOutcome::Timeout,
        })
    }

    fn prompt(&mut self, request: &PromptRequest) -> Result<String, PortError> {
        self.ask(request.message.clone(), request.buttons.clone(), None)?
            .ok_or_else(gone)
    }
}
