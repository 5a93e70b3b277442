#!/usr/bin/env python3
# Copyright (C) 2026 The metatool authors
# SPDX-License-Identifier: Apache-2.0
"""Writes fixtures/prompts/*.txt from hand-copied reference listings.

The listings below keep their original line wrapping; a line that ends in a space
continues on the next line. Variants (shot count, docs off) are produced by editing
the listing text, not by templating, so the fixtures stay independent of build().
"""
import pathlib
import sys

LISTINGS = {
    "api": """<|begin_of_text|><|start_header_id|>system<|end_header_id|>

# Model Loading API

Generate Python code to load the appropriate 
pre-trained model.

FORMATS (use exactly as shown):
1. torchvision.models.MODEL_NAME(pretrained=True)
2. torchvision.models.detection.MODEL_NAME(pretrained=True)
3. pipeline('TASK', model='MODEL_NAME')

Output ONLY the code. No imports, no explanations.

Examples:
Query: Load a pre-trained ResNet50 model for image 
       classification
Output: torchvision.models.resnet50(pretrained=True)

Query: I need DenseNet for image classification
Output: torchvision.models.densenet161(pretrained=True)

Query: Create a sentiment analysis pipeline
Output: pipeline('sentiment-analysis', 
        model='distilbert-base-uncased-finetuned-sst-2-english')
<|eot_id|><|start_header_id|>user<|end_header_id|>

Load MobileNet for efficient image classification

Output ONLY the exact code needed, nothing else.
<|eot_id|><|start_header_id|>assistant<|end_header_id|>

""",
    "sql": """<|begin_of_text|><|start_header_id|>system<|end_header_id|>

# Enterprise SQL Query Generator

Generate SQL queries for the given database schema.

Schema:
- employees(id, name, department_id, salary, hire_date)
- departments(id, name, budget)
- projects(id, name, department_id, start_date, end_date)

Output ONLY the SQL query. No explanations.

Examples:
Query: List all employees in the Engineering department
Output: SELECT e.* FROM employees e 
        JOIN departments d ON e.department_id = d.id 
        WHERE d.name = 'Engineering'

Query: Find the average salary by department
Output: SELECT d.name, AVG(e.salary) as avg_salary 
        FROM employees e 
        JOIN departments d ON e.department_id = d.id 
        GROUP BY d.name
<|eot_id|><|start_header_id|>user<|end_header_id|>

Find departments with total salary exceeding 500000

Output ONLY the exact SQL query needed, nothing else.
<|eot_id|><|start_header_id|>assistant<|end_header_id|>

""",
    "nav": """<|begin_of_text|><|start_header_id|>system<|end_header_id|>

# Web Navigation Agent

Generate browser actions for web navigation tasks.

Available Actions:
- click[element_id]: Click on an element
- type[element_id][text]: Type text into a field
- scroll[direction]: Scroll up/down
- goto[url]: Navigate to URL

Output ONLY the action command.

Examples:
Query: Click the login button
Output: click[login-btn]

Query: Enter "john@email.com" in the email field
Output: type[email-input][john@email.com]
<|eot_id|><|start_header_id|>user<|end_header_id|>

Add the first product to the shopping cart

Output ONLY the exact action needed, nothing else.
<|eot_id|><|start_header_id|>assistant<|end_header_id|>

""",
    "bash": """<|begin_of_text|><|start_header_id|>system<|end_header_id|>

# Bash Command Generator

Generate bash commands for system tasks.

Output ONLY the command. No explanations.

Examples:
Query: List all Python files in the current directory
Output: find . -name "*.py" -type f

Query: Count lines in all text files
Output: wc -l *.txt

Query: Find files modified in the last 24 hours
Output: find . -mtime -1 -type f
<|eot_id|><|start_header_id|>user<|end_header_id|>

Search for the word "error" in all log files

Output ONLY the exact command needed, nothing else.
<|eot_id|><|start_header_id|>assistant<|end_header_id|>

""",
}

# Extra examples appended after the listed ones, in order.
EXTRA = {
    "api": [
        ("Detect objects in street photos",
         "torchvision.models.detection.fasterrcnn_resnet50_fpn(pretrained=True)"),
        ("Build a question answering pipeline",
         "pipeline('question-answering', model='distilbert-base-cased-distilled-squad')"),
    ],
    "sql": [
        ("Count the projects of each department",
         "SELECT d.name, COUNT(p.id) as n_projects FROM projects p JOIN departments d "
         "ON p.department_id = d.id GROUP BY d.name"),
        ("List employees earning more than 90000", "SELECT name FROM employees WHERE salary > 90000"),
        ("Show the three departments with the largest budget",
         "SELECT name FROM departments ORDER BY budget DESC LIMIT 3"),
    ],
    "nav": [
        ("Scroll down to see more results", "scroll[down]"),
        ("Open the orders page", "goto[https://shop.example.com/orders]"),
        ("Search for wireless headphones", "type[search-box][wireless headphones]"),
    ],
    "bash": [
        ("Show the last 20 lines of app.log", "tail -n 20 app.log"),
        ("Count the running processes", "ps aux | wc -l"),
    ],
}

EOT = "\n<|eot_id|><|start_header_id|>user<|end_header_id|>"
SYSTEM = "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n"


def unwrap(text):
    lines = text.split("\n")
    out = []
    joining = False
    for line in lines:
        if joining:
            out[-1] = out[-1].rstrip(" ") + " " + line.lstrip(" ")
        else:
            out.append(line)
        joining = line.endswith(" ")
    return "\n".join(out)


def count_examples(text):
    return text.count("\nQuery: ")


def with_shots(text, family, shots):
    have = count_examples(text)
    if shots < have:
        head, tail = text.split(EOT, 1)
        blocks = head.split("\n\nQuery: ")
        head = "\n\nQuery: ".join(blocks[: shots + 1]) if shots else blocks[0]
        return head + EOT + tail
    extra = EXTRA[family][: shots - have]
    added = "".join(f"\n\nQuery: {q}\nOutput: {o}" for q, o in extra)
    return text.replace(EOT, added + EOT, 1)


def without_docs(text):
    body = text[len(SYSTEM):]
    # The documentation is everything before the "Output ONLY the ..." instruction.
    cut = body.index("Output ONLY the ")
    return SYSTEM + body[cut:]


def main():
    out_dir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures/prompts")
    out_dir.mkdir(parents=True, exist_ok=True)
    for family, listing in LISTINGS.items():
        base = unwrap(listing)
        for shots in (3, 5):
            shot_text = with_shots(base, family, shots)
            assert count_examples(shot_text) == shots, (family, shots)
            for docs in (True, False):
                text = shot_text if docs else without_docs(shot_text)
                name = f"{family}_{shots}shot_docs_{'on' if docs else 'off'}.txt"
                (out_dir / name).write_bytes(text.encode("utf-8"))


if __name__ == "__main__":
    main()
