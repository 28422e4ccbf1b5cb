from munch import Munch, munchify

defaults: Munch = munchify(
    {
        "out_dir": "./poikg_out",
        "synth_file": "synthetic.csv",
        "sweep": {
            "hours": "1,2,4,8,12,24",
            "dims": "70,80,90,100,110,120",
            "fractions": "0,0.1,0.2,0.3,0.4",
        },
        "recommend": {"k": 10},
        "logging": {
            "debug": False,
            "trace": False,
            "record_log": False,
            "logging_dir": "~/.poikg/logs",
        },
    }
)

from .data import IngestCommand, SynthCommand
from .graph import BuildGraphCommand
from .embed import ExtractCommand, TrainEmbedCommand
from .factorize import TrainMFCommand
from .recommend import EvaluateCommand, RecommendCommand
from .experiments import SparsityCommand, SweepDimCommand, SweepTimeslotCommand
