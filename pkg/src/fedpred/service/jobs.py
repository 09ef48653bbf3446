"""In-memory background job store for long experiment runs."""

from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class Job:
    job_id: str
    state: str = "pending"  # pending | running | done | failed
    result: object = None
    error: str | None = None


@dataclass
class JobStore:
    _jobs: dict[str, Job] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def submit(self, work: Callable[[], object]) -> str:
        job = Job(job_id=uuid.uuid4().hex)
        with self._lock:
            self._jobs[job.job_id] = job

        def runner() -> None:
            with self._lock:
                job.state = "running"
            try:
                result = work()
            except Exception as err:  # surfaced through the job status
                with self._lock:
                    job.state = "failed"
                    job.error = f"{type(err).__name__}: {err}"
                    job.result = None
                traceback.print_exc()
                return
            with self._lock:
                job.state = "done"
                job.result = result

        threading.Thread(target=runner, daemon=True).start()
        return job.job_id

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)
