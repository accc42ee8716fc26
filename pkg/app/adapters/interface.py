from abc import ABC, abstractmethod
from typing import Iterable, List, Optional, Tuple

from app.models import AsyncLaunchSite, CompileDiagnostic, RunOutcome, Scope, SubjectFunction, TestId


class SubjectAdapter(ABC):
    """
    Contract between the pipeline and a subject codebase.

    Implementations parse, compile and run tests of one toolchain. The
    pipeline never touches the subject toolchain except through this class.
    """

    @abstractmethod
    def parse_functions(self, file_text: str, path: str) -> List[SubjectFunction]:
        pass

    @abstractmethod
    def find_async_launches(self, file_text: str, fn: SubjectFunction) -> List[AsyncLaunchSite]:
        pass

    @abstractmethod
    def compile(self, workspace: str) -> List[CompileDiagnostic]:
        pass

    @abstractmethod
    def run_test(
        self,
        workspace: str,
        selector: TestId,
        scope: Scope,
        runs: int,
        race: bool,
        timeout: float,
        env: Optional[dict] = None,
    ) -> List[RunOutcome]:
        pass

    @abstractmethod
    def package_dir(self, target: str) -> str:
        """Workspace-relative directory that holds a test target."""
        pass

    @abstractmethod
    def source_files(self, workspace: str, packages: Optional[Iterable[str]] = None) -> List[str]:
        pass

    @abstractmethod
    def locate_test_function(self, workspace: str, test: TestId) -> Tuple[str, SubjectFunction]:
        pass

    def is_test_file(self, path: str) -> bool:
        return False
