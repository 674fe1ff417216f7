from . import metadata
from . import ingestion
from . import harvester
from . import benchmark
from . import scoring
from . import random_forest
from . import classifier
from . import evaluation
from . import analysis
from . import config
