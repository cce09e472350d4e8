import os
from enum import Enum

PWD = os.path.dirname(os.path.abspath(__file__))
PROJECT_DIR = os.path.abspath(os.path.join(PWD, "..", ".."))
DATA_DIR_ENV = "CROSSDOMAIN_SE_DATA_DIR"
DATA_DIR = os.environ.get(DATA_DIR_ENV, PROJECT_DIR)

LOGGING_DIR = os.path.join(DATA_DIR, "logs")
RES_DIR = os.path.join(PROJECT_DIR, "res")
JSON_DIR = os.path.join(RES_DIR, "json")
TEMPLATES_DIR = os.path.join(RES_DIR, "templates")
DEFAULT_CONFIGS_FILE = os.path.join(JSON_DIR, "default_configs.json")

LOGGING_ONLY_CONSOLE = "LOGGING_ONLY_CONSOLE"
CROSSDOMAIN_SE_LOGGING_LEVEL = "CROSSDOMAIN_SE_LOGGING_LEVEL"
ASR_URL_ENV = "CROSSDOMAIN_SE_ASR_URL"
ASR_TIMEOUT_ENV = "CROSSDOMAIN_SE_ASR_TIMEOUT"
ASR_RETRIES_ENV = "CROSSDOMAIN_SE_ASR_RETRIES"
PESQ_COMMAND_ENV = "CROSSDOMAIN_SE_PESQ_COMMAND"

SAMPLE_RATE = 16000
FIXED_SEGMENT_LENGTH = 16000  # one second at SAMPLE_RATE
EMBEDDING_SIZE = 256


class ConfigNames:
    """Names of the configuration documents held by the ConfigManager."""

    SIGNAL = "signal"
    SSNR = "metrics-ssnr"
    STOI = "metrics-stoi"
    COMPOSITE = "metrics-composite"
    WIENER = "metrics-wiener"
    ASR_CLIENT = "metrics-asr-client"
    ASR_SERVER = "metrics-asr-server"
    PESQ = "metrics-pesq"
    CORPUS = "data-synthetic-corpus"
    MIXING = "data-mixing"
    TRAINING = "harness-training"
    REPORT = "harness-report"


class Framework(Enum):
    WIENER = "wiener"
    SEGAN = "segan"
    WAVENET = "wavenet"
    CD_WAVENET = "cd_wavenet"
    FSEGAN = "fsegan"
    AEGAN = "aegan"
    CD_AEGAN = "cd_aegan"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


class ModelFamily(Enum):
    UNET1D = "unet1d"
    GATED_DILATED_STACK = "gated_dilated_stack"
    UNET2D = "unet2d"
    CASNET = "casnet"
    DISC1D = "disc1d"
    DISC2D = "disc2d"


class LossKind(Enum):
    ADV = "adv"
    L1_TIME = "l1_time"
    L1_TF = "l1_tf"
    FEATURE = "feature"


class DomainBridge(Enum):
    NONE = "none"
    STFT = "stft"
    ISTFT_WITH_NOISY_PHASE = "istft_with_noisy_phase"


class SegmentPolicy(Enum):
    PAD = "pad"
    DROP = "drop"


# Column order of the comparison table.
TABLE_COLUMNS = ["PESQ", "CSIG", "CBAK", "COVL", "SSNR", "STOI", "1-WER"]
