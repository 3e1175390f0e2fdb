"""Deterministic text and machine reports."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

REPORT_FORMAT = 1
HEADER = f"potsys report format {REPORT_FORMAT}"

PASS, FAIL, FLAG = "pass", "fail", "flag"


@dataclass
class Item:
    key: str
    value: str = ""
    status: str | None = None  # pass | fail | flag | None (informational)
    detail: str = ""


@dataclass
class Section:
    name: str
    items: list = field(default_factory=list)

    def info(self, key, value):
        self.items.append(Item(key, str(value)))

    def check(self, key, ok, detail="", value=""):
        status = ok if isinstance(ok, str) else (PASS if ok else FAIL)
        self.items.append(Item(key, value, status, detail))


def _key(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+\-]", "_", s)


@dataclass
class Report:
    command: str
    problem: str
    sections: list = field(default_factory=list)

    def section(self, name) -> Section:
        s = Section(name)
        self.sections.append(s)
        return s

    def statuses(self):
        return [i.status for s in self.sections for i in s.items if i.status]

    @property
    def passed(self) -> bool:
        return FAIL not in self.statuses()

    @property
    def status(self) -> str:
        return PASS if self.passed else FAIL

    def counts(self):
        st = self.statuses()
        return {k: st.count(k) for k in (PASS, FAIL, FLAG)}

    def render_text(self) -> str:
        out = [HEADER, f"command: {self.command}", f"problem: {self.problem}", ""]
        for s in self.sections:
            out.append(f"== {s.name} ==")
            for i in s.items:
                line = f"  {i.key}"
                if i.value:
                    line += f": {i.value}"
                if i.status:
                    line += f"  [{i.status.upper()}]"
                out.append(line)
                if i.detail:
                    out.append(f"      {i.detail}")
            out.append("")
        c = self.counts()
        out.append(f"summary: {c[PASS]} passed, {c[FAIL]} failed, {c[FLAG]} flagged")
        out.append(f"status: {self.status}")
        return "\n".join(out) + "\n"

    def render_machine(self) -> str:
        out = [HEADER, f"command = {self.command}", f"problem = {self.problem}"]
        for s in self.sections:
            base = _key(s.name)
            for i in s.items:
                k = f"{base}.{_key(i.key)}"
                if i.status:
                    out.append(f"{k}.status = {i.status}")
                    if i.value:
                        out.append(f"{k}.value = {i.value}")
                    if i.detail:
                        out.append(f"{k}.detail = {i.detail}")
                else:
                    out.append(f"{k} = {i.value}")
        c = self.counts()
        out += [f"summary.pass = {c[PASS]}", f"summary.fail = {c[FAIL]}", f"summary.flag = {c[FLAG]}",
                f"status = {self.status}"]
        return "\n".join(out) + "\n"

    def render(self, kind: str = "text") -> str:
        return self.render_machine() if kind == "machine" else self.render_text()
