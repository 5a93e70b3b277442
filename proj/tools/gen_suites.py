#!/usr/bin/env python3
# Copyright (C) 2026 The metatool authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the bundled task suites, 50 tasks per family, to data/suites/*.jsonl."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent


def api_tasks():
    nice = {
        "resnet18": "ResNet-18", "resnet50": "ResNet-50", "resnet101": "ResNet-101", "vgg16": "VGG16",
        "vgg19": "VGG19", "densenet121": "DenseNet-121", "densenet161": "DenseNet-161",
        "mobilenet_v2": "MobileNetV2", "mobilenet_v3_small": "MobileNetV3 Small", "efficientnet_b0": "EfficientNet-B0",
        "inception_v3": "Inception v3", "googlenet": "GoogLeNet", "alexnet": "AlexNet", "squeezenet1_0": "SqueezeNet 1.0",
        "shufflenet_v2_x1_0": "ShuffleNetV2", "convnext_tiny": "ConvNeXt Tiny", "vit_b_16": "ViT-B/16",
        "regnet_y_400mf": "RegNetY-400MF", "wide_resnet50_2": "Wide ResNet-50-2", "resnext50_32x4d": "ResNeXt-50",
    }
    out = []
    for i, (m, n) in enumerate(nice.items()):
        out.append((f"Load a pre-trained {n} model for image classification",
                    f"torchvision.models.{m}(pretrained=True)"))
    for m in ["resnet18", "vgg16", "mobilenet_v2", "alexnet", "efficientnet_b0", "densenet121"]:
        out.append((f"Create an untrained {nice[m]} to train from scratch",
                    f"torchvision.models.{m}(pretrained=False)"))
    det = {
        "fasterrcnn_resnet50_fpn": "Faster R-CNN", "maskrcnn_resnet50_fpn": "Mask R-CNN",
        "retinanet_resnet50_fpn": "RetinaNet", "ssd300_vgg16": "SSD300", "keypointrcnn_resnet50_fpn": "Keypoint R-CNN",
        "fcos_resnet50_fpn": "FCOS",
    }
    for m, n in det.items():
        out.append((f"Load a pre-trained {n} detector for finding objects in images",
                    f"torchvision.models.detection.{m}(pretrained=True)"))
    for m in ["fasterrcnn_resnet50_fpn", "retinanet_resnet50_fpn"]:
        out.append((f"Create an untrained {det[m]} detector", f"torchvision.models.detection.{m}(pretrained=False)"))
    pipes = [
        ("Create a sentiment analysis pipeline with DistilBERT fine-tuned on SST-2",
         "sentiment-analysis", "distilbert-base-uncased-finetuned-sst-2-english"),
        ("Classify the sentiment of product reviews", "sentiment-analysis",
         "distilbert-base-uncased-finetuned-sst-2-english"),
        ("Answer questions about a paragraph using DistilBERT trained on SQuAD", "question-answering",
         "distilbert-base-cased-distilled-squad"),
        ("Build an extractive question answering pipeline", "question-answering", "distilbert-base-cased-distilled-squad"),
        ("Summarize news articles with BART", "summarization", "facebook/bart-large-cnn"),
        ("Summarize long documents with T5 small", "summarization", "t5-small"),
        ("Generate text continuations with GPT-2", "text-generation", "gpt2"),
        ("Tag named entities in sentences", "ner", "dbmdz/bert-large-cased-finetuned-conll03-english"),
        ("Fill in masked words with BERT base", "fill-mask", "bert-base-uncased"),
        ("Fill in masked words with RoBERTa base", "fill-mask", "roberta-base"),
        ("Classify texts into labels without training data", "zero-shot-classification", "facebook/bart-large-mnli"),
        ("Translate English sentences to French with T5 small", "translation_en_to_fr", "t5-small"),
        ("Generate story openings with GPT-2", "text-generation", "gpt2"),
        ("Extract person and place names from text", "ner", "dbmdz/bert-large-cased-finetuned-conll03-english"),
        ("Route support tickets to topics without labelled examples", "zero-shot-classification",
         "facebook/bart-large-mnli"),
        ("Create a French translation pipeline", "translation_en_to_fr", "t5-small"),
    ]
    for q, task, model in pipes:
        out.append((q, f"pipeline('{task}', model='{model}')"))
    recs = []
    for i, (q, call) in enumerate(out[:50]):
        recs.append({"id": f"api-{i + 1:03d}", "family": "api", "query": q, "gold": {"call": call},
                     "schema_ref": call.split("(")[0]})
    return recs


def sql_tasks():
    depts = ["Engineering", "Sales", "Marketing", "HR", "Finance"]
    join = "FROM employees e JOIN departments d ON e.department_id = d.id"
    pjoin = "FROM projects p JOIN departments d ON p.department_id = d.id"
    out = []
    for d in depts:
        out.append((f"List all employees in the {d} department", f"SELECT e.* {join} WHERE d.name = '{d}'"))
    for d in depts:
        out.append((f"How many employees work in {d}?", f"SELECT COUNT(*) {join} WHERE d.name = '{d}'"))
    for d in depts:
        out.append((f"Show the names of projects run by {d}", f"SELECT p.name {pjoin} WHERE d.name = '{d}'"))
    for d in depts[:4]:
        out.append((f"What is the highest salary in {d}?", f"SELECT MAX(e.salary) {join} WHERE d.name = '{d}'"))
    for x in [80000, 90000, 100000, 110000, 125000]:
        out.append((f"List employees earning more than {x}", f"SELECT name FROM employees WHERE salary > {x}"))
    for x in [75000, 85000, 95000]:
        out.append((f"Which employees earn less than {x}?", f"SELECT name FROM employees WHERE salary < {x}"))
    for x in [300000, 500000, 200000]:
        out.append((f"Find departments with total salary exceeding {x}",
                    f"SELECT d.name {join} GROUP BY d.name HAVING SUM(e.salary) > {x}"))
    for n, w in [(1, "one"), (2, "two"), (3, "three")]:
        out.append((f"Show the {w} departments with the largest budget",
                    f"SELECT name FROM departments ORDER BY budget DESC LIMIT {n}"))
    for date in ["2020-01-01", "2021-06-30", "2022-01-01"]:
        out.append((f"Who was hired after {date}?", f"SELECT name FROM employees WHERE hire_date > '{date}'"))
    for b in [400000, 550000, 700000]:
        out.append((f"List departments with a budget under {b}", f"SELECT name FROM departments WHERE budget < {b}"))
    for lo, hi in [(80000, 100000), (90000, 110000)]:
        out.append((f"Find employees with a salary between {lo} and {hi}",
                    f"SELECT name FROM employees WHERE salary >= {lo} AND salary <= {hi}"))
    out += [
        ("Find the average salary by department", f"SELECT d.name, AVG(e.salary) as avg_salary {join} GROUP BY d.name"),
        ("Count the employees in each department", f"SELECT d.name, COUNT(*) {join} GROUP BY d.name"),
        ("Show the highest salary in each department", f"SELECT d.name, MAX(e.salary) {join} GROUP BY d.name"),
        ("Count the projects of each department", f"SELECT d.name, COUNT(p.id) as n_projects {pjoin} GROUP BY d.name"),
        ("What is the total budget of all departments?", "SELECT SUM(budget) FROM departments"),
        ("Who is the highest paid employee?", "SELECT name FROM employees ORDER BY salary DESC LIMIT 1"),
        ("How many projects start in 2024?", "SELECT COUNT(*) FROM projects WHERE start_date >= '2024-01-01'"),
        ("List departments that have at least three employees",
         f"SELECT d.name {join} GROUP BY d.name HAVING COUNT(*) >= 3"),
        ("List all departments", "SELECT name FROM departments"),
    ]
    assert len(out) == 50, len(out)
    return [{"id": f"sql-{i + 1:03d}", "family": "sql", "query": q, "gold": {"sql": s}} for i, (q, s) in enumerate(out)]


def nav_tasks():
    out = []
    buttons = ["login", "logout", "checkout", "search", "submit", "next-page", "previous-page", "add-to-cart",
               "wishlist", "cart", "help", "settings", "apply-coupon", "place-order", "close"]
    for b in buttons:
        out.append((f"Click the {b.replace('-', ' ')} button", f"click[{b}-btn]"))
    fields = [("email", "john@email.com"), ("password", "hunter2"), ("search", "wireless headphones"),
              ("search", "usb cable"), ("coupon", "SAVE10"), ("name", "Jane Doe"), ("address", "12 Main St"),
              ("city", "Springfield"), ("zip", "90210"), ("phone", "555-0100"), ("quantity", "3"),
              ("comment", "Leave at the door"), ("username", "jdoe"), ("search", "running shoes"),
              ("email", "ops@shop.example.com")]
    for f, t in fields:
        out.append((f'Enter "{t}" in the {f} field', f"type[{f}-input][{t}]"))
    for d, phr in [("down", "Scroll down the page"), ("up", "Scroll back up"), ("down", "Scroll down to see more results"),
                   ("up", "Go back to the top of the page by scrolling"), ("down", "Scroll further down"),
                   ("up", "Scroll up a bit")]:
        out.append((phr, f"scroll[{d}]"))
    pages = ["orders", "cart", "account", "wishlist", "help", "returns", "deals", "login", "checkout",
             "products/laptops", "products/phones", "account/addresses", "track-order", "contact"]
    for p in pages:
        out.append((f"Open the {p.replace('/', ' ').replace('-', ' ')} page", f"goto[https://shop.example.com/{p}]"))
    assert len(out) == 50, len(out)
    return [{"id": f"nav-{i + 1:03d}", "family": "nav", "query": q, "gold": {"action": a}} for i, (q, a) in enumerate(out)]


def bash_tasks():
    out = []
    for ext, name in [("py", "Python"), ("txt", "text"), ("log", "log"), ("csv", "CSV"), ("md", "Markdown")]:
        out.append((f"List all {name} files in the current directory",
                    [f'find . -name "*.{ext}" -type f', f"ls *.{ext}"]))
    for f in ["app.log", "data.csv", "notes.txt"]:
        out.append((f"Count lines in {f}", [f"wc -l {f}"]))
    for n, f in [(10, "app.log"), (5, "data.csv"), (20, "server.log")]:
        out.append((f"Show the first {n} lines of {f}", [f"head -n {n} {f}"]))
    for n, f in [(20, "app.log"), (50, "server.log"), (5, "error.log")]:
        out.append((f"Show the last {n} lines of {f}", [f"tail -n {n} {f}"]))
    for w in ["error", "warning", "timeout", "failed"]:
        out.append((f'Search for the word "{w}" in all log files', [f'grep "{w}" *.log', f'grep -r "{w}" *.log']))
    for n in [1, 7, 30]:
        out.append((f"Find files modified in the last {n} days" if n > 1 else "Find files modified in the last 24 hours",
                    [f"find . -mtime -{n} -type f"]))
    for d in ["/var/log", "/home", "src"]:
        out.append((f"Show the disk usage of {d}", [f"du -sh {d}"]))
    for d in ["build", "logs/archive", "tmp"]:
        out.append((f"Create the directory {d}", [f"mkdir -p {d}", f"mkdir {d}"]))
    for f in ["old.log", "cache.tmp"]:
        out.append((f"Delete the file {f}", [f"rm {f}", f"rm -f {f}"]))
    for f in ["numbers.txt", "scores.txt"]:
        out.append((f"Sort {f} numerically", [f"sort -n {f}"]))
    for f in ["names.txt", "ids.txt"]:
        out.append((f"Count the unique lines in {f}", [f"sort {f} | uniq | wc -l", f"sort -u {f} | wc -l"]))
    out += [
        ("Print the current working directory", ["pwd"]),
        ("Show which user I am logged in as", ["whoami"]),
        ("Show free disk space in human readable form", ["df -h"]),
        ("List running processes", ["ps aux", "ps"]),
        ("Count the running processes", ["ps aux | wc -l"]),
        ("List all files including hidden ones with details", ["ls -la", "ls -l -a"]),
        ("Show the current date", ["date"]),
        ("Create an empty file called notes.txt", ["touch notes.txt"]),
        ("Count the words in essay.txt", ["wc -w essay.txt"]),
        ("Show numbered lines of config.ini", ["cat -n config.ini"]),
        ("Find empty files in the current directory", ["find . -empty -type f", "find . -type f -empty"]),
        ("Count lines containing error in app.log", ['grep -c "error" app.log', "grep -c error app.log"]),
        ("Print the first column of data.csv", ["cut -d , -f 1 data.csv", "cut -d ',' -f 1 data.csv"]),
        ("Archive the logs directory into logs.tar.gz", ["tar -czf logs.tar.gz logs"]),
        ("Show the last 100 lines of syslog and follow new output", ["tail -n 100 -f syslog", "tail -f -n 100 syslog"]),
        ("List files sorted by modification time", ["ls -lt", "ls -t"]),
        ("Show the 10 largest entries sorted by size in the current directory", ["du -a | sort -nr | head -n 10"]),
    ]
    assert len(out) == 50, len(out)
    return [{"id": f"bash-{i + 1:03d}", "family": "bash", "query": q, "gold": {"accept": a}}
            for i, (q, a) in enumerate(out)]


def main():
    out_dir = ROOT / "data" / "suites"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, recs in [("api", api_tasks()), ("sql", sql_tasks()), ("nav", nav_tasks()), ("bash", bash_tasks())]:
        assert len(recs) == 50, (name, len(recs))
        assert len({r["query"] for r in recs}) == 50, name
        with open(out_dir / f"{name}.jsonl", "w") as f:
            for r in recs:
                f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
