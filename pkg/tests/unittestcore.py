import os
import shutil
import sys
import tempfile
import unittest

RSC_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "rsc")


class BaseUnitTest(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp(prefix="ps_teleport_")
        self.argv = list(sys.argv)

    def tearDown(self):
        sys.argv[:] = self.argv
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def set_cli_args(self, *args, **kwargs):
        """
        Fills sys.argv for main(): positional args first (the subcommand), then --key value pairs.
        kwarg "flag" appends a bare flag such as --json; pass a list to append several.
        """
        arg = [arg for arg in args]

        for k, v in kwargs.items():
            # bare flags, such as --json or --emit-plot
            if k == "flag":
                arg.extend(v if isinstance(v, (list, tuple)) else [v])
                continue

            arg.append("--{}".format(k.replace("_", "-")))
            arg.append("{}".format(v))

        sys.argv[1:] = arg

    def tmp_path(self, name):
        return os.path.join(self.tmp_dir, name)

    @staticmethod
    def config_path(name):
        return os.path.join(RSC_DIR, "config", name)
