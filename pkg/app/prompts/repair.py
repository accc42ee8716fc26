"""
Flaky-test repair prompts.

Each purpose has a system prompt and a user template. Template wording is
part of the transcript contract: changing it changes every prompt hash.
"""

REPAIR_SYSTEM_PROMPT = """You are an expert in fixing flaky tests in Go codebases. Only make changes to the test code, not the production code."""

SELECTION_SYSTEM_PROMPT = """You are an expert in fixing flaky tests in Go codebases. You help choose which functions from a failing execution are most relevant to the root cause of a flaky failure. Answer with candidate numbers only."""

EXTRACT_SYSTEM_PROMPT = """You extract structured failure information from Go test output. Answer with a single JSON object and nothing else."""

FAILURE_EVIDENCE_TEMPLATE = """Flaky test: {test}
Failure message:
{message}
Assertion site: {assertion_file}:{assertion_line}
Assertion statement:
{assertion_stmt}
Stack trace:
{stack_trace}"""

SELECT_USER_PROMPT_TEMPLATE = """{evidence}

{guidance_section}The function {parent} was executed during the failing run. It called the functions below.
Choose at most {k} of them whose code is most likely needed to explain or fix the flaky failure.

{candidates}

Reply with the numbers of the chosen functions, most relevant first."""

FILTER_USER_PROMPT_TEMPLATE = """{evidence}

{guidance_section}These functions were collected from the failing execution:

{candidates}

Choose at most {F} of them that are most relevant to the root cause of the flaky failure.
Reply with the numbers of the chosen functions, most relevant first."""

THOUGHT_USER_PROMPT_TEMPLATE = """{evidence}

Test function under repair ({test_file}):
```go
{test_code}
```

Relevant production code from the failing execution:
{context}

Known root-cause categories of flaky tests:
{taxonomy}

{history_section}Analyse why this test is flaky. Only make changes to the test code, not the production code.
Answer with exactly these three labeled sections:
CATEGORY: <one category from the list, or other(<new category>)>
EXPLANATION: <root-cause explanation that refers to the code above>
PLAN: <how to change the test function to remove the flakiness>"""

FIX_USER_PROMPT_TEMPLATE = """{evidence}

Test function under repair ({test_file}):
```go
{test_code}
```

Relevant production code from the failing execution:
{context}

Root-cause analysis to follow:
CATEGORY: {category}
EXPLANATION: {explanation}
PLAN: {plan}

{attempts_section}Rewrite the test function {func} so the test is no longer flaky. Only make changes to the test code, not the production code.
Return the complete fixed function {func} in a single ```go fenced block, with no other code blocks."""

REPAIR_USER_PROMPT_TEMPLATE = """The fixed test function does not compile.

Original code:
```go
{original}
```

Modified code:
```go
{modified}
```

Compilation errors:
{diagnostics}

Return the complete corrected function {func} in a single ```go fenced block, with no other code blocks. Only make changes to the test code, not the production code."""

EXTRACT_USER_PROMPT_TEMPLATE = """Extract the failure of this Go test run.

Return a JSON object with the keys "message" (the failure message), "file" (path of the file where the failing assertion or panic happened), "line" (its line number) and "stack_trace" (empty string if there is none).

Test output:
{raw_output}"""
