import logging
from dotenv import load_dotenv
from src.core.utils.logging import DefaultLogger

load_dotenv()
logging.setLoggerClass(DefaultLogger)
logger = logging.getLogger(__name__)
