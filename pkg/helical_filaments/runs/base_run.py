import os
import re
import json
import shutil

import pandas as pd

from helical_filaments import utils
from helical_filaments.errors import ValidationError


class Operations:

    def __init__(self, event_logger, *modules):
        '''
        Logging wrapper around the numerical entry points of the given modules

        ops = Operations(logger, cluster_solver); ops.solve_clustered(...) logs
        'OPERATION INFO: Calling solve_clustered' before and 'Exiting ...' after the call
        '''
        self.event_logger = event_logger
        self.modules = modules

    def __getattr__(self, name):
        for module in self.modules:
            if hasattr(module, name):
                operation = getattr(module, name)
                break
        else:
            raise AttributeError('No operation named %s' % name)

        def wrapper(*args, **kwargs):
            self.event_logger('OPERATION INFO: Calling %s' % operation.__name__)
            result = operation(*args, **kwargs)
            self.event_logger('OPERATION INFO: Exiting %s' % operation.__name__)
            return result
        return wrapper


class Run:
    '''
    Base class for the scenario runs
    '''

    # the event categories that also go to the important-events log (and are printed)
    important_labels = ['RUN', 'PICARD', 'QHAT', 'ERROR', 'WARNING']

    # the modules whose functions self.operations wraps
    operation_modules = ()

    def __init__(self, root_dir, config, overwrite=False, verbose=True):
        '''
        root_dir : the output directory (created if needed)
        config : the validated RunConfig
        overwrite : whether to remove the logs of a previous run in root_dir
            (its artifacts are overwritten)
        verbose : whether to print the important log messages

        '''
        root_dir = re.sub('%s+$' % re.escape(os.sep), '', root_dir) or os.sep
        self.root_dir = root_dir
        self.config = config
        self.verbose = verbose
        self.operations = Operations(self.event_logger, *self.operation_modules)

        # subdirectory for logfiles
        self.log_dir = os.path.join(self.root_dir, 'logs')

        if os.path.isdir(self.log_dir):
            if not overwrite:
                raise ValidationError(
                    'The output directory %s already holds a run (pass --overwrite)' % self.root_dir,
                    out=self.root_dir
                )
            print('WARNING: Removing the logs of the previous run in %s' % self.root_dir)
            shutil.rmtree(self.log_dir)

        os.makedirs(self.log_dir, exist_ok=True)

        # event logs (plaintext)
        self.all_events_log_file = os.path.join(self.log_dir, 'all-events.log')
        self.error_events_log_file = os.path.join(self.log_dir, 'error-events.log')
        self.important_events_log_file = os.path.join(self.log_dir, 'important-events.log')

        # run metadata log (JSON)
        self.metadata_log_file = os.path.join(self.log_dir, 'run-metadata.json')

        # per-sweep solver progress (CSV)
        self.iteration_log_file = os.path.join(self.log_dir, 'solver-iterations.csv')

        self.git_commit = utils.current_git_commit(os.path.dirname(os.path.abspath(__file__)))
        if self.git_commit is None:
            print('Warning: no git repo found and the git commit will not be logged')
        else:
            self.metadata_logger('git_commit', self.git_commit)

        self.metadata_logger('root_directory', self.root_dir)
        self.metadata_logger('run_name', self.__class__.__name__)
        self.metadata_logger('config', config.document)

        # the settings groups, as dicts
        for name in ['grid', 'linear', 'picard', 'qhat', 'integrator', 'optimizer', 'output']:
            self.metadata_logger('%s_settings' % name, dict(getattr(config, name)._asdict()))


    def event_logger(self, message, newline=False):
        '''
        Append a message to the event log

        This method is passed to the numerical modules as their event_logger,
        so the category tag in each message (e.g. 'PICARD INFO') identifies where it came from
        '''
        log_filepaths = [self.all_events_log_file]

        message = '%s %s' % (utils.timestamp(), message)
        if newline:
            message = '\n%s' % message

        message_is_important = any(label in message for label in self.important_labels)
        if message_is_important:
            log_filepaths.append(self.important_events_log_file)

        if 'ERROR' in message:
            log_filepaths.append(self.error_events_log_file)

        for filepath in log_filepaths:
            with open(filepath, 'a') as file:
                file.write('%s\n' % message)

        if self.verbose and message_is_important:
            print(message)


    def metadata_logger(self, key, value):
        '''
        Set a key of the run-level metadata (a JSON object)
        '''
        if os.path.isfile(self.metadata_log_file):
            with open(self.metadata_log_file, 'r') as file:
                metadata = json.load(file)
        else:
            metadata = {}

        metadata[key] = utils.to_jsonable(value)
        with open(self.metadata_log_file, 'w') as file:
            json.dump(metadata, file)


    def iteration_logger(self, row):
        '''
        Append a row (a dict) to the solver iteration log
        '''
        row = {'timestamp': utils.timestamp(), **row}
        if os.path.isfile(self.iteration_log_file):
            d = pd.read_csv(self.iteration_log_file)
            d = pd.concat([d, pd.DataFrame([row])], ignore_index=True)
        else:
            d = pd.DataFrame([row])
        d.to_csv(self.iteration_log_file, index=False)


    def setup(self):
        '''
        Commands to execute before the run
        '''
        self.metadata_logger('setup_timestamp', utils.timestamp())


    def run(self):
        '''
        The main workflow
        '''
        raise NotImplementedError


    def cleanup(self):
        '''
        Commands to execute after self.run, whether or not it succeeded
        '''
        self.metadata_logger('cleanup_timestamp', utils.timestamp())
