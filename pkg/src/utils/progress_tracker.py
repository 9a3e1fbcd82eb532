"""
Progress bars for long enumerations.

Removed sets, meld candidates, union patterns and acceptance criteria each run
inside one phase. Bars go to stderr so reports printed on stdout stay clean;
a quiet tracker, or no tracker at all, still counts but never renders.

    tracker = ProgressTracker()
    with tracker.phase("Classifying rigid_body", total=62) as bar:
        for removed in subsets:
            ...
            bar.advance(removed.label())
"""

import time
from contextlib import contextmanager
from typing import Iterator, Optional

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TextColumn,
    TimeElapsedColumn,
)


class Phase:
    """Counter of one phase, mirrored on a rich task when one is attached."""

    def __init__(
        self,
        title: str,
        total: int,
        done: int = 0,
        bar: Optional[Progress] = None,
        task: Optional[TaskID] = None,
    ) -> None:
        self.title = title
        self.total = total
        self.completed = done
        self.failed = 0
        self._bar = bar
        self._task = task

    @property
    def rendering(self) -> bool:
        return self._bar is not None and self._task is not None

    def advance(self, item: Optional[str] = None, n: int = 1, ok: bool = True) -> None:
        """Count n items; `item` names the one just finished, `ok=False` counts it as failed."""
        self.completed += n
        if not ok:
            self.failed += n
        if not self.rendering:
            return
        description = f"{self.title} [dim]{item}[/dim]" if item else self.title
        self._bar.update(self._task, advance=n, description=description)  # type: ignore[union-attr, arg-type]

    def label(self, item: str) -> None:
        """Name the item about to start without counting it."""
        if self.rendering:
            self._bar.update(self._task, description=f"{self.title} [dim]{item}[/dim]")  # type: ignore[union-attr, arg-type]


class ProgressTracker:
    """Opens phases on a shared stderr console."""

    def __init__(self, console: Optional[Console] = None, quiet: bool = False) -> None:
        self.console = console or Console(stderr=True)
        self.quiet = quiet

    def _bar(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=self.console,
        )

    @contextmanager
    def phase(self, title: str, total: int, done: int = 0) -> Iterator[Phase]:
        """
        Run one phase; the bar starts at `done` for resumed work.

        A summary line is printed when the block exits normally. On an
        exception the bar is stopped and the exception propagates.
        """
        if self.quiet:
            yield Phase(title, total, done)
            return

        bar = self._bar()
        task = bar.add_task(title, total=total, completed=done)
        current = Phase(title, total, done, bar, task)
        start = time.perf_counter()
        bar.start()
        try:
            yield current
        finally:
            bar.stop()
        elapsed = time.perf_counter() - start
        passed = current.completed - current.failed
        if current.failed:
            self.console.print(
                f"[bold red]✗ {title}:[/bold red] {passed}/{total} "
                f"({current.failed} failed) in {elapsed:.1f}s"
            )
        else:
            self.console.print(f"[bold green]✓ {title}:[/bold green] {passed}/{total} in {elapsed:.1f}s")


@contextmanager
def phase(
    tracker: Optional[ProgressTracker], title: str, total: int, done: int = 0
) -> Iterator[Phase]:
    """Phase on `tracker`, or a silent counter when there is none."""
    if tracker is None:
        yield Phase(title, total, done)
        return
    with tracker.phase(title, total, done) as current:
        yield current
