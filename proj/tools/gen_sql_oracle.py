#!/usr/bin/env python3
# Copyright (C) 2026 The metatool authors
# SPDX-License-Identifier: Apache-2.0
"""Runs reference queries through sqlite3 and stores the result rows.

The output is the test oracle for the in-repo SQL engine. Extra queries can be given
as JSONL files (objects with a "gold" member holding {"sql": ...}).
"""
import json
import pathlib
import sqlite3
import sys

QUERIES = [
    "SELECT name FROM departments",
    "SELECT * FROM departments",
    "SELECT e.* FROM employees e JOIN departments d ON e.department_id = d.id WHERE d.name = 'Engineering'",
    "SELECT d.name, AVG(e.salary) as avg_salary FROM employees e JOIN departments d ON e.department_id = d.id GROUP BY d.name",
    "SELECT d.name FROM employees e JOIN departments d ON e.department_id = d.id GROUP BY d.name HAVING SUM(e.salary) > 500000",
    "SELECT d.name, COUNT(p.id) as n_projects FROM projects p JOIN departments d ON p.department_id = d.id GROUP BY d.name",
    "SELECT name FROM employees WHERE salary > 90000",
    "SELECT name FROM departments ORDER BY budget DESC LIMIT 3",
    "SELECT COUNT(*) FROM employees",
    "SELECT COUNT(*) FROM employees WHERE salary > 1000000",
    "SELECT AVG(salary) FROM employees WHERE salary > 1000000",
    "SELECT MAX(salary), MIN(salary) FROM employees",
    "SELECT department_id, COUNT(*) FROM employees GROUP BY department_id HAVING COUNT(*) >= 3",
    "SELECT name, salary FROM employees WHERE department_id = 2 AND salary < 90000",
    "SELECT name FROM employees WHERE department_id = 3 OR department_id = 4",
    "SELECT name FROM employees WHERE NOT (salary >= 80000)",
    "SELECT name FROM employees WHERE hire_date > '2021-01-01' ORDER BY hire_date",
    "SELECT name, salary FROM employees ORDER BY salary DESC LIMIT 1",
    "select name from projects where start_date >= '2024-01-01'",
    "SELECT p.name, d.name FROM projects p JOIN departments d ON p.department_id = d.id WHERE d.budget > 700000",
    "SELECT d.name, SUM(e.salary) AS total_salary FROM employees e JOIN departments d ON e.department_id = d.id GROUP BY d.name ORDER BY total_salary DESC",
    "SELECT SUM(budget) FROM departments",
    "SELECT name FROM employees WHERE name != 'Alice' AND department_id = 1",
    "SELECT name FROM employees WHERE salary <> 98000 AND department_id = 1",
    "SELECT department_id, MAX(salary) FROM employees GROUP BY department_id",
    "SELECT d.* FROM departments d WHERE d.budget <= 500000",
    "SELECT COUNT(e.id) FROM employees e JOIN projects p ON e.department_id = p.department_id",
    "SELECT name FROM departments WHERE budget > 550000 ORDER BY name ASC",
    "SELECT e.name FROM employees e WHERE e.salary > 100000 AND (e.department_id = 1 OR e.department_id = 5)",
    "SELECT department_id, AVG(salary) FROM employees GROUP BY department_id ORDER BY AVG(salary) DESC LIMIT 2",
]


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    db = json.loads((root / "data/sql/company.json").read_text())
    con = sqlite3.connect(":memory:")
    for name, table in db["tables"].items():
        cols = ", ".join(table["columns"])
        con.execute(f"CREATE TABLE {name} ({cols})")
        marks = ", ".join("?" for _ in table["columns"])
        con.executemany(f"INSERT INTO {name} VALUES ({marks})", table["rows"])
    queries = list(QUERIES)
    for extra in sys.argv[2:]:
        for line in pathlib.Path(extra).read_text().splitlines():
            if line.strip():
                queries.append(json.loads(line)["gold"]["sql"])
    out = []
    for q in queries:
        cur = con.execute(q)
        rows = [list(r) for r in cur.fetchall()]
        out.append({"sql": q, "width": len(cur.description), "rows": rows})
    target = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else root / "fixtures/sql/oracle.json"
    target.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
