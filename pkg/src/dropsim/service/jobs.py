"""Background run execution with a thread-per-job registry."""

from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import dataclass, field

from .. import runner


@dataclass
class RunJob:
    run_id: str
    cfg: object
    state: str = "queued"           # queued | running | done | failed
    step: int = 0
    time: float = 0.0
    n_steps: int = 0
    error: str | None = None
    latest: dict | None = None
    report: dict | None = None
    thread: threading.Thread | None = field(default=None, repr=False)

    def status_dict(self):
        t_final = self.cfg.t_final
        progress = min(self.time / t_final, 1.0) if t_final > 0 else 1.0
        if self.state == "done":
            progress = 1.0
        return {"run_id": self.run_id, "state": self.state, "step": self.step,
                "time": self.time, "t_final": t_final, "progress": progress,
                "dt": None if self.report is None else self.report.get("dt"),
                "output_dir": self.cfg.output_dir, "error": self.error,
                "latest": self.latest}


class JobRegistry:
    """In-memory registry; one worker thread per submitted run."""

    def __init__(self):
        self._jobs: dict[str, RunJob] = {}
        self._lock = threading.Lock()

    def submit(self, cfg) -> RunJob:
        job = RunJob(run_id=uuid.uuid4().hex[:12], cfg=cfg)
        with self._lock:
            self._jobs[job.run_id] = job
        thread = threading.Thread(target=self._work, args=(job,), daemon=True)
        job.thread = thread
        thread.start()
        return job

    def _work(self, job: RunJob):
        job.state = "running"
        def progress(step, n_steps, time):
            job.step, job.n_steps, job.time = step, n_steps, time
        try:
            report = runner.execute_run(job.cfg, progress=progress)
            job.report = report.as_dict()
            job.latest = report.final.as_dict()
            job.step = report.steps
            job.time = report.final.time
            job.state = "done"
        except Exception as exc:
            job.error = f"{exc}\n{traceback.format_exc(limit=5)}"
            job.state = "failed"

    def get(self, run_id) -> RunJob | None:
        with self._lock:
            return self._jobs.get(run_id)

    def list(self):
        with self._lock:
            return list(self._jobs.values())

    def wait(self, run_id, timeout=None):
        job = self.get(run_id)
        if job and job.thread:
            job.thread.join(timeout)
        return job
