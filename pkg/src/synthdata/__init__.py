from src.synthdata.fileformat import export_dataset, export_import, import_dataset  # noqa: F401
from src.synthdata.generator import SyntheticDataset, generate  # noqa: F401
from src.synthdata.selftest import graph_informativeness  # noqa: F401
from src.synthdata.spec import SyntheticSpec  # noqa: F401
